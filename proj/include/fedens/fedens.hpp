// Copyright 2026 The fedens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "fedens/checkpoint.hpp"
#include "fedens/clustering.hpp"
#include "fedens/commands.hpp"
#include "fedens/config.hpp"
#include "fedens/data.hpp"
#include "fedens/ensemble.hpp"
#include "fedens/error.hpp"
#include "fedens/experiment.hpp"
#include "fedens/fed.hpp"
#include "fedens/metrics.hpp"
#include "fedens/nn.hpp"
#include "fedens/privacy.hpp"
#include "fedens/seed.hpp"

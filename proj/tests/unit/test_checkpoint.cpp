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

#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "fedens/checkpoint.hpp"
#include "test_util.hpp"

namespace fedens {
namespace {

TEST(Checkpoint, ExactByteLayout) {
  MlpModel m(std::vector<std::size_t>{2, 1});
  m.weight(0, 0, 0) = 1.0;
  m.weight(0, 0, 1) = -2.0;
  m.biases(0)[0] = 0.5;
  const auto bytes = encode_checkpoint(m);
  // magic, version 1, count 2, dims 2 and 1, then 1.0, -2.0, 0.5 as LE doubles.
  const std::vector<unsigned char> expected{
      'F', 'E', 'L', 'M',
      1, 0, 0, 0,
      2, 0, 0, 0,
      2, 0, 0, 0,
      1, 0, 0, 0,
      0, 0, 0, 0, 0, 0, 0xF0, 0x3F,
      0, 0, 0, 0, 0, 0, 0x00, 0xC0,
      0, 0, 0, 0, 0, 0, 0xE0, 0x3F};
  EXPECT_EQ(bytes, expected);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  testutil::TempDir dir;
  const auto m = build_mlp(37, 3, 99);
  save_checkpoint(m, dir / "m.felm");
  const auto back = load_checkpoint(dir / "m.felm");
  EXPECT_EQ(back, m);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(m));
}

TEST(Checkpoint, RejectsBadMagicVersionAndTruncation) {
  const auto good = encode_checkpoint(build_mlp(4, 2, 1));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), IoError);
  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad_version), IoError);
  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), IoError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), IoError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.felm"), IoError);
}

}  // namespace
}  // namespace fedens

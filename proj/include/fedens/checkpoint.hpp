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

// FELM checkpoint format, all integers little-endian:
//
//   bytes 0..3   "FELM"
//   u32          format version (kCheckpointVersion)
//   u32          number of layer widths
//   u32 * n      layer widths, input first
//   f64 * P      parameters in MlpModel flattening order (IEEE-754 LE)

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fedens/error.hpp"
#include "fedens/nn.hpp"

namespace fedens {

inline constexpr std::array<char, 4> kCheckpointMagic{'F', 'E', 'L', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::uint64_t get(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw IoError("truncated checkpoint");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    }
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const MlpModel& model) {
  std::vector<unsigned char> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_u32(out, kCheckpointVersion);
  const auto& dims = model.layer_dims();
  detail::put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (double p : model.parameters()) {
    detail::put_u64(out, std::bit_cast<std::uint64_t>(p));
  }
  return out;
}

inline MlpModel decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 ||
      !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
    throw IoError("not a FELM checkpoint");
  }
  std::vector<unsigned char> body(bytes.begin() + 4, bytes.end());
  detail::ByteReader reader(body);
  const auto version = static_cast<std::uint32_t>(reader.get(4));
  if (version != kCheckpointVersion) {
    throw IoError("unsupported FELM version " + std::to_string(version));
  }
  const auto count = static_cast<std::uint32_t>(reader.get(4));
  if (count < 2 || count > 1024) throw IoError("bad layer count in checkpoint");
  std::vector<std::size_t> dims(count);
  for (auto& d : dims) d = static_cast<std::size_t>(reader.get(4));
  MlpModel model(std::move(dims));
  for (double& p : model.parameters()) {
    p = std::bit_cast<double>(reader.get(8));
  }
  if (!reader.done()) throw IoError("trailing bytes after checkpoint");
  return model;
}

inline void save_checkpoint(const MlpModel& model,
                            const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fedens

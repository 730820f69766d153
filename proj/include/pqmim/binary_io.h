// Copyright 2026 The pqmim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PQMIM_BINARY_IO_H_
#define PQMIM_BINARY_IO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace pqmim {

// Little-endian serialization helpers shared by every artifact format.
class ByteWriter {
 public:
  void PutU8(uint8_t v) { bytes_.push_back(v); }
  void PutU16(uint16_t v);
  void PutU32(uint32_t v);
  void PutU64(uint64_t v);
  void PutI8(int8_t v) { PutU8(static_cast<uint8_t>(v)); }
  void PutF32(float v);
  void PutTag(std::string_view tag);
  void PutBytes(std::span<const uint8_t> data);

  const std::vector<uint8_t>& bytes() const { return bytes_; }
  std::vector<uint8_t> Release() { return std::move(bytes_); }
  size_t size() const { return bytes_.size(); }

 private:
  std::vector<uint8_t> bytes_;
};

// Bounds-checked reader. Reading past the end throws kCorruptData.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t GetU8();
  uint16_t GetU16();
  uint32_t GetU32();
  uint64_t GetU64();
  int8_t GetI8() { return static_cast<int8_t>(GetU8()); }
  float GetF32();
  // Throws kCorruptData if the next bytes are not `tag`.
  void ExpectTag(std::string_view tag, std::string_view what);
  std::span<const uint8_t> GetBytes(size_t n);

  size_t position() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void Need(size_t n) const;

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

// CRC-32 (ISO-HDLC polynomial, as used by zlib/PNG).
uint32_t Crc32(std::span<const uint8_t> data);

// 64-bit FNV-1a. Used as the content id of trained artifacts.
uint64_t Fnv1a64(std::span<const uint8_t> data);

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const uint8_t> data);

}  // namespace pqmim

#endif  // PQMIM_BINARY_IO_H_

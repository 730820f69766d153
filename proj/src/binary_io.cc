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

#include "pqmim/binary_io.h"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "pqmim/error.h"

namespace pqmim {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
      return "invalid-input";
    case ErrorCode::kInvalidConfig:
      return "invalid-config";
    case ErrorCode::kCorruptData:
      return "corrupt-data";
    case ErrorCode::kModelMismatch:
      return "model-mismatch";
    case ErrorCode::kUnsupportedVersion:
      return "unsupported-version";
    case ErrorCode::kIo:
      return "io-error";
  }
  return "unknown";
}

void ByteWriter::PutU16(uint16_t v) {
  PutU8(static_cast<uint8_t>(v));
  PutU8(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::PutU32(uint32_t v) {
  for (int i = 0; i < 4; ++i) PutU8(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::PutU64(uint64_t v) {
  for (int i = 0; i < 8; ++i) PutU8(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::PutF32(float v) { PutU32(std::bit_cast<uint32_t>(v)); }

void ByteWriter::PutTag(std::string_view tag) {
  for (char c : tag) PutU8(static_cast<uint8_t>(c));
}

void ByteWriter::PutBytes(std::span<const uint8_t> data) {
  bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void ByteReader::Need(size_t n) const {
  if (remaining() < n) {
    Fail(ErrorCode::kCorruptData, "unexpected end of data");
  }
}

uint8_t ByteReader::GetU8() {
  Need(1);
  return data_[pos_++];
}

uint16_t ByteReader::GetU16() {
  Need(2);
  uint16_t v = static_cast<uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

uint32_t ByteReader::GetU32() {
  Need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::GetU64() {
  Need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::GetF32() { return std::bit_cast<float>(GetU32()); }

void ByteReader::ExpectTag(std::string_view tag, std::string_view what) {
  Need(tag.size());
  if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
    Fail(ErrorCode::kCorruptData, "bad magic for " + std::string(what));
  }
  pos_ += tag.size();
}

std::span<const uint8_t> ByteReader::GetBytes(size_t n) {
  Need(n);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

uint32_t Crc32(std::span<const uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay portable.
  size_t offset = 0;
  while (offset < data.size()) {
    const size_t chunk = std::min<size_t>(data.size() - offset, 1u << 30);
    crc = crc32(crc, data.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<uint32_t>(crc);
}

uint64_t Fnv1a64(std::span<const uint8_t> data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) Fail(ErrorCode::kIo, "read failed: " + path.string());
  return bytes;
}

void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) Fail(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace pqmim

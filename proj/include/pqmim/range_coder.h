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

#ifndef PQMIM_RANGE_CODER_H_
#define PQMIM_RANGE_CODER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pqmim/entropy_model.h"

namespace pqmim {

// Byte-oriented range coder over 16-bit cumulative frequencies: 32-bit
// range, 64-bit low with carry propagation through a cached byte.
// Integer-only, so output is identical on every platform.
class RangeEncoder {
 public:
  // Codes the interval [start, start + width) of a kCdfTotal scale.
  void Encode(uint32_t start, uint32_t width);
  // Codes `symbol` under `cdf`. Throws kInvalidInput for a symbol outside
  // the alphabet and kInvalidConfig for a malformed CDF or zero width.
  void EncodeSymbol(const IntegerCdf& cdf, int symbol);
  // Flushes the state and returns the payload. The encoder is spent.
  std::vector<uint8_t> Finish();

 private:
  void ShiftLow();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws kCorruptData if the payload is too short to hold a flush.
  explicit RangeDecoder(std::span<const uint8_t> bytes);

  int DecodeSymbol(const IntegerCdf& cdf);
  size_t bytes_consumed() const { return pos_; }

 private:
  uint8_t NextByte();

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
};

// Supplies the CDF for the symbol at a given sequence index.
using CdfProvider = std::function<const IntegerCdf&(size_t index)>;

std::vector<uint8_t> EncodeSymbols(std::span<const int> symbols, const CdfProvider& cdfs);
// Throws kCorruptData when the payload runs out or decodes to an
// impossible value.
std::vector<int> DecodeSymbols(std::span<const uint8_t> bytes, const CdfProvider& cdfs,
                               size_t count);

// -log2(width / kCdfTotal): the ideal code length of one coded symbol.
double IdealBits(const IntegerCdf& cdf, int symbol);

}  // namespace pqmim

#endif  // PQMIM_RANGE_CODER_H_

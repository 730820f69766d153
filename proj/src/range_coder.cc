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

#include "pqmim/range_coder.h"

#include <algorithm>
#include <cmath>

#include "pqmim/error.h"

namespace pqmim {
namespace {

constexpr uint32_t kTop = 1u << 24;

void CheckCdf(const IntegerCdf& cdf) {
  if (cdf.size() < 2 || cdf.front() != 0 || cdf.back() != kCdfTotal) {
    Fail(ErrorCode::kInvalidConfig, "CDF must run from 0 to 2^16");
  }
}

}  // namespace

void RangeEncoder::Encode(uint32_t start, uint32_t width) {
  if (width == 0) Fail(ErrorCode::kInvalidConfig, "zero-width symbol");
  if (start + width > kCdfTotal) Fail(ErrorCode::kInvalidConfig, "interval exceeds CDF total");
  const uint32_t r = range_ >> kCdfPrecisionBits;
  low_ += static_cast<uint64_t>(r) * start;
  range_ = r * width;
  while (range_ < kTop) {
    range_ <<= 8;
    ShiftLow();
  }
}

void RangeEncoder::EncodeSymbol(const IntegerCdf& cdf, int symbol) {
  CheckCdf(cdf);
  if (symbol < 0 || static_cast<size_t>(symbol) + 1 >= cdf.size()) {
    Fail(ErrorCode::kInvalidInput, "symbol outside the CDF alphabet");
  }
  if (cdf[symbol + 1] <= cdf[symbol]) Fail(ErrorCode::kInvalidConfig, "zero-width symbol");
  Encode(cdf[symbol], cdf[symbol + 1] - cdf[symbol]);
}

void RangeEncoder::ShiftLow() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<uint8_t> RangeEncoder::Finish() {
  for (int i = 0; i < 5; ++i) ShiftLow();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  if (NextByte() != 0) Fail(ErrorCode::kCorruptData, "range coder payload has a bad lead byte");
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | NextByte();
}

uint8_t RangeDecoder::NextByte() {
  if (pos_ >= bytes_.size()) Fail(ErrorCode::kCorruptData, "range coder payload exhausted");
  return bytes_[pos_++];
}

int RangeDecoder::DecodeSymbol(const IntegerCdf& cdf) {
  CheckCdf(cdf);
  const uint32_t r = range_ >> kCdfPrecisionBits;
  const uint32_t value = code_ / r;
  if (value >= kCdfTotal) Fail(ErrorCode::kCorruptData, "range coder value out of range");
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), value);
  const int symbol = static_cast<int>(it - cdf.begin()) - 1;
  const uint32_t start = cdf[symbol];
  const uint32_t width = cdf[symbol + 1] - start;
  if (width == 0) Fail(ErrorCode::kInvalidConfig, "zero-width symbol");
  code_ -= r * start;
  range_ = r * width;
  while (range_ < kTop) {
    code_ = (code_ << 8) | NextByte();
    range_ <<= 8;
  }
  return symbol;
}

std::vector<uint8_t> EncodeSymbols(std::span<const int> symbols, const CdfProvider& cdfs) {
  RangeEncoder encoder;
  for (size_t i = 0; i < symbols.size(); ++i) encoder.EncodeSymbol(cdfs(i), symbols[i]);
  return encoder.Finish();
}

std::vector<int> DecodeSymbols(std::span<const uint8_t> bytes, const CdfProvider& cdfs,
                               size_t count) {
  RangeDecoder decoder(bytes);
  std::vector<int> out(count);
  for (size_t i = 0; i < count; ++i) out[i] = decoder.DecodeSymbol(cdfs(i));
  return out;
}

double IdealBits(const IntegerCdf& cdf, int symbol) {
  const double width = static_cast<double>(cdf[symbol + 1] - cdf[symbol]);
  return -std::log2(width / kCdfTotal);
}

}  // namespace pqmim

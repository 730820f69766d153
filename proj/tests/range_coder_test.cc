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

#include <gtest/gtest.h>

#include <cmath>

#include "pqmim/random.h"
#include "test_util.h"

namespace pqmim {
namespace {

using testing::CodeOf;

IntegerCdf UniformCdf(int v) {
  IntegerCdf cdf(v + 1);
  for (int i = 0; i <= v; ++i) cdf[i] = static_cast<uint32_t>(static_cast<uint64_t>(i) * kCdfTotal / v);
  return cdf;
}

IntegerCdf RandomCdf(SplitMix64& rng) {
  const int v = 2 + static_cast<int>(rng.Below(rng.Below(4) == 0 ? 400 : 16));
  std::vector<double> p(v);
  const double skew = 1 + 8 * rng.NextDouble();
  for (auto& x : p) x = std::pow(rng.NextDouble(), skew);
  return QuantizeCdf(p);
}

// Draws a symbol with probability proportional to its width.
int SampleFrom(const IntegerCdf& cdf, SplitMix64& rng) {
  const uint32_t u = static_cast<uint32_t>(rng.Below(kCdfTotal));
  return static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) - 1;
}

TEST(RangeCoderTest, EmptyStreamIsFlushOnly) {
  const std::vector<int> none;
  const auto bytes = EncodeSymbols(none, [](size_t) -> const IntegerCdf& {
    static const IntegerCdf cdf = UniformCdf(2);
    return cdf;
  });
  EXPECT_LE(bytes.size(), 8u);
  EXPECT_TRUE(DecodeSymbols(bytes, nullptr, 0).empty());
}

TEST(RangeCoderTest, UniformBytes) {
  const IntegerCdf cdf = UniformCdf(256);
  SplitMix64 rng(1);
  std::vector<int> symbols(1000);
  for (int& s : symbols) s = static_cast<int>(rng.Below(256));
  const auto bytes = EncodeSymbols(symbols, [&](size_t) -> const IntegerCdf& { return cdf; });
  EXPECT_GE(bytes.size(), 1000u);
  EXPECT_LE(bytes.size(), 1009u);
  EXPECT_EQ(DecodeSymbols(bytes, [&](size_t) -> const IntegerCdf& { return cdf; }, 1000), symbols);
}

TEST(RangeCoderTest, NearCertainSymbol) {
  const IntegerCdf cdf = {0, 65535, 65536};
  const std::vector<int> symbols(1000, 0);
  const auto bytes = EncodeSymbols(symbols, [&](size_t) -> const IntegerCdf& { return cdf; });
  EXPECT_LE(bytes.size(), 11u);
  std::vector<int> with_rare = symbols;
  with_rare[500] = 1;
  const auto bytes2 = EncodeSymbols(with_rare, [&](size_t) -> const IntegerCdf& { return cdf; });
  EXPECT_EQ(DecodeSymbols(bytes2, [&](size_t) -> const IntegerCdf& { return cdf; }, 1000),
            with_rare);
}

TEST(RangeCoderTest, FuzzedRoundTripAndRateBound) {
  SplitMix64 rng(7);
  const size_t n = 100000;
  std::vector<IntegerCdf> cdfs(n);
  std::vector<int> symbols(n);
  double ideal = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cdfs[i] = RandomCdf(rng);
    symbols[i] = rng.Below(10) == 0 ? static_cast<int>(rng.Below(cdfs[i].size() - 1))
                                    : SampleFrom(cdfs[i], rng);
    ideal += IdealBits(cdfs[i], symbols[i]);
  }
  const CdfProvider provider = [&](size_t i) -> const IntegerCdf& { return cdfs[i]; };
  const auto bytes = EncodeSymbols(symbols, provider);
  EXPECT_EQ(DecodeSymbols(bytes, provider, n), symbols);
  const double slack = 8.0 * bytes.size() - ideal;
  EXPECT_GE(slack, 0.0);
  EXPECT_LE(slack, 64.0 + 0.01 * n);
}

TEST(RangeCoderTest, TwoSymbolExtremes) {
  const IntegerCdf cdf = {0, 65535, 65536};
  SplitMix64 rng(3);
  std::vector<int> symbols(5000);
  for (int& s : symbols) s = rng.Below(3) == 0 ? 1 : 0;
  const CdfProvider provider = [&](size_t) -> const IntegerCdf& { return cdf; };
  EXPECT_EQ(DecodeSymbols(EncodeSymbols(symbols, provider), provider, symbols.size()), symbols);
}

TEST(RangeCoderTest, TruncatedPayload) {
  const IntegerCdf cdf = UniformCdf(256);
  SplitMix64 rng(4);
  std::vector<int> symbols(200);
  for (int& s : symbols) s = static_cast<int>(rng.Below(256));
  const CdfProvider provider = [&](size_t) -> const IntegerCdf& { return cdf; };
  auto bytes = EncodeSymbols(symbols, provider);
  for (size_t keep : {size_t{0}, size_t{3}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<uint8_t> cut(bytes.begin(), bytes.begin() + keep);
    EXPECT_EQ(CodeOf([&] { DecodeSymbols(cut, provider, symbols.size()); }),
              ErrorCode::kCorruptData)
        << keep;
  }
}

TEST(RangeCoderTest, GarbageIsCorruptData) {
  const IntegerCdf cdf = UniformCdf(4);
  const CdfProvider provider = [&](size_t) -> const IntegerCdf& { return cdf; };
  const std::vector<uint8_t> lead = {1, 0, 0, 0, 0, 0};
  EXPECT_EQ(CodeOf([&] { DecodeSymbols(lead, provider, 1); }), ErrorCode::kCorruptData);
  const std::vector<uint8_t> high = {0, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
  EXPECT_EQ(CodeOf([&] { DecodeSymbols(high, provider, 1); }), ErrorCode::kCorruptData);
}

TEST(RangeCoderTest, EncoderErrors) {
  RangeEncoder enc;
  const IntegerCdf cdf = UniformCdf(4);
  EXPECT_EQ(CodeOf([&] { enc.EncodeSymbol(cdf, 4); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(CodeOf([&] { enc.EncodeSymbol(cdf, -1); }), ErrorCode::kInvalidInput);
  const IntegerCdf zero_width = {0, 0, 65536};
  EXPECT_EQ(CodeOf([&] { enc.EncodeSymbol(zero_width, 0); }), ErrorCode::kInvalidConfig);
}

TEST(RangeCoderTest, IdealBits) {
  const IntegerCdf cdf = {0, 16384, 65536};
  EXPECT_DOUBLE_EQ(IdealBits(cdf, 0), 2.0);
  EXPECT_NEAR(IdealBits(cdf, 1), -std::log2(0.75), 1e-12);
}

}  // namespace
}  // namespace pqmim

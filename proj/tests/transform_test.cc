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

#include "pqmim/transform.h"

#include <gtest/gtest.h>

#include <cmath>

#include "pqmim/eval.h"
#include "pqmim/random.h"
#include "test_util.h"

namespace pqmim {
namespace {

using testing::CodeOf;
using testing::RandomImage;
using testing::SmoothImage;

PatchMatrix CorpusPatches(int f, int count) {
  PatchMatrix all;
  for (int i = 0; i < count; ++i) {
    PatchMatrix p = ExtractPatches(SmoothImage(64, 64, i), f);
    if (i == 0) {
      all = p;
    } else {
      all.Append(p);
    }
  }
  return all;
}

TEST(ExtractPatchesTest, Counts) {
  EXPECT_EQ(ExtractPatches(ImageBuffer(256, 256), 16).rows, 256);
  EXPECT_EQ(ExtractPatches(ImageBuffer(256, 256), 16).cols, 768);
  EXPECT_EQ(ExtractPatches(ImageBuffer(256, 256), 8).rows, 1024);
  EXPECT_EQ(ExtractPatches(ImageBuffer(17, 16), 16).rows, 2);
}

TEST(ExtractPatchesTest, LayoutAndReflectPadding) {
  const ImageBuffer img = RandomImage(17, 16, 7);
  const PatchMatrix p = ExtractPatches(img, 16);
  auto at = [&](int patch, int py, int px, int c) { return p.row(patch)[(py * 16 + px) * 3 + c]; };
  EXPECT_EQ(at(0, 3, 5, 2), img.at(5, 3, 2));
  EXPECT_EQ(at(1, 4, 0, 1), img.at(16, 4, 1));
  // Mirror about the last column without repeating it.
  EXPECT_EQ(at(1, 4, 1, 1), img.at(15, 4, 1));
  EXPECT_EQ(at(1, 9, 3, 0), img.at(13, 9, 0));
}

TEST(ExtractPatchesTest, Errors) {
  EXPECT_EQ(CodeOf([] { ExtractPatches(ImageBuffer(), 8); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(CodeOf([] { ExtractPatches(ImageBuffer(4, 4), 0); }), ErrorCode::kInvalidConfig);
}

TEST(FitBasisTest, OrthonormalRows) {
  const TransformBasis b = FitBasis(CorpusPatches(8, 4), 8, 24, 0);
  for (int i = 0; i < b.latent_dim; ++i) {
    for (int j = 0; j < b.latent_dim; ++j) {
      double dot = 0.0;
      for (int k = 0; k < b.patch_dim(); ++k) dot += double{b.row(i)[k]} * b.row(j)[k];
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-6) << i << "," << j;
    }
  }
}

TEST(FitBasisTest, EnergyOrdering) {
  const PatchMatrix patches = CorpusPatches(8, 4);
  const TransformBasis b = FitBasis(patches, 8, 16, 0);
  std::vector<double> var(b.latent_dim, 0.0);
  for (int t = 0; t < patches.rows; ++t) {
    for (int k = 0; k < b.latent_dim; ++k) {
      double c = 0.0;
      for (int j = 0; j < b.patch_dim(); ++j) c += b.row(k)[j] * (patches.row(t)[j] - b.mean[j]);
      var[k] += c * c;
    }
  }
  for (int k = 1; k < b.latent_dim; ++k) EXPECT_LE(var[k], var[k - 1] * (1 + 1e-6)) << k;
  for (int k = 1; k < b.latent_dim; ++k) EXPECT_LE(b.eigenvalues[k], b.eigenvalues[k - 1]);
}

TEST(FitBasisTest, DeterministicForSeed) {
  const PatchMatrix patches = CorpusPatches(4, 2);
  EXPECT_EQ(SerializeBasis(FitBasis(patches, 4, 10, 3)), SerializeBasis(FitBasis(patches, 4, 10, 3)));
}

TEST(FitBasisTest, CompleteBasisRoundTrip) {
  std::vector<ImageBuffer> imgs;
  PatchMatrix patches;
  for (int i = 0; i < 4; ++i) {
    imgs.push_back(RandomImage(32, 32, 10 + i));
    PatchMatrix p = ExtractPatches(imgs.back(), 4);
    if (i == 0) {
      patches = p;
    } else {
      patches.Append(p);
    }
  }
  const TransformBasis b = FitBasis(patches, 4, 48, 0);
  for (int i = 0; i < 8; ++i) {
    const ImageBuffer img = RandomImage(30, 21, 100 + i);
    const ImageBuffer back = Inverse(Forward(img, b), b, img.width(), img.height());
    int max_err = 0;
    for (size_t k = 0; k < img.samples().size(); ++k) {
      max_err = std::max(max_err, std::abs(int{img.samples()[k]} - int{back.samples()[k]}));
    }
    EXPECT_LE(max_err, 1);
    EXPECT_GE(Psnr(img, back), 50.0);
  }
}

TEST(FitBasisTest, RankOneData) {
  // Patches mean + a * u for a fixed direction u.
  const int f = 2;
  const int dim = 12;
  SplitMix64 rng(5);
  std::vector<double> u(dim), mu(dim);
  double norm = 0.0;
  for (int j = 0; j < dim; ++j) {
    u[j] = rng.NextDouble() - 0.5;
    mu[j] = 100 + 50 * rng.NextDouble();
    norm += u[j] * u[j];
  }
  for (double& v : u) v /= std::sqrt(norm);
  PatchMatrix patches;
  patches.rows = 200;
  patches.cols = dim;
  for (int t = 0; t < patches.rows; ++t) {
    const double a = 60 * (rng.NextDouble() - 0.5);
    for (int j = 0; j < dim; ++j) patches.values.push_back(static_cast<float>(mu[j] + a * u[j]));
  }
  const TransformBasis b = FitBasis(patches, f, 1, 0);
  double mse = 0.0;
  for (int t = 0; t < patches.rows; ++t) {
    auto p = patches.row(t);
    double c = 0.0;
    for (int j = 0; j < dim; ++j) c += b.row(0)[j] * (p[j] - b.mean[j]);
    for (int j = 0; j < dim; ++j) {
      const double r = b.mean[j] + c * b.row(0)[j];
      mse += (r - p[j]) * (r - p[j]);
    }
  }
  mse /= patches.rows * dim;
  EXPECT_LT(mse, 1e-8);
}

TEST(FitBasisTest, ConstantCorpusIsRankDeficient) {
  PatchMatrix patches = ExtractPatches(testing::ConstantImage(16, 16, 77), 4);
  const TransformBasis b = FitBasis(patches, 4, 5, 1);
  for (float v : b.mean) EXPECT_FLOAT_EQ(v, 77.0f);
  for (double e : b.eigenvalues) EXPECT_NEAR(e, 0.0, 1e-9);
  EXPECT_TRUE(b.rank_deficient);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      double dot = 0.0;
      for (int k = 0; k < b.patch_dim(); ++k) dot += double{b.row(i)[k]} * b.row(j)[k];
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-6);
    }
  }
}

TEST(FitBasisTest, Errors) {
  const PatchMatrix patches = CorpusPatches(2, 1);
  EXPECT_EQ(CodeOf([&] { FitBasis(patches, 2, 13, 0); }), ErrorCode::kInvalidConfig);
  PatchMatrix few;
  few.rows = 2;
  few.cols = 12;
  few.values.assign(24, 1.0f);
  EXPECT_EQ(CodeOf([&] { FitBasis(few, 2, 3, 0); }), ErrorCode::kInvalidInput);
}

TEST(ForwardInverseTest, TrivialCases) {
  TransformBasis b = FitBasis(CorpusPatches(4, 2), 4, 6, 0);
  // Zero mean and zero image give zero latents.
  TransformBasis zero_mean = b;
  std::fill(zero_mean.mean.begin(), zero_mean.mean.end(), 0.0f);
  const LatentGrid z = Forward(ImageBuffer(8, 8), zero_mean);
  for (double v : z.values) EXPECT_EQ(v, 0.0);

  // An image made of the (rounded) mean patch gives near-zero coefficients.
  for (float& v : b.mean) v = std::round(v);
  ImageBuffer mean_img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) mean_img.at(x, y, c) = static_cast<uint8_t>(b.mean[(y * 4 + x) * 3 + c]);
  for (double v : Forward(mean_img, b).values) EXPECT_NEAR(v, 0.0, 1e-9);

  // All-zero latents reproduce the mean patch.
  LatentGrid zeros{2, 1, 6, std::vector<double>(12, 0.0)};
  const ImageBuffer out = Inverse(zeros, b, 7, 4);
  EXPECT_EQ(out.width(), 7);
  EXPECT_EQ(out.at(5, 2, 1), mean_img.at(1, 2, 1));
}

TEST(ForwardInverseTest, CropsPaddedSize) {
  const ImageBuffer img = RandomImage(17, 16, 3);
  const TransformBasis b = FitBasis(ExtractPatches(RandomImage(64, 64, 9), 16), 16, 8, 0);
  const LatentGrid z = Forward(img, b);
  EXPECT_EQ(z.grid_w, 2);
  EXPECT_EQ(z.grid_h, 1);
  const ImageBuffer out = Inverse(z, b, 17, 16);
  EXPECT_EQ(out.width(), 17);
  EXPECT_EQ(out.height(), 16);
}

TEST(ForwardInverseTest, Errors) {
  const TransformBasis b = FitBasis(CorpusPatches(4, 1), 4, 6, 0);
  const TransformBasis b8 = FitBasis(CorpusPatches(8, 1), 8, 6, 0);
  const LatentGrid z = Forward(ImageBuffer(8, 8), b);
  EXPECT_EQ(CodeOf([&] { Inverse(z, b8, 8, 8); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(CodeOf([&] { Inverse(z, b, 16, 8); }), ErrorCode::kInvalidConfig);
  TransformBasis broken = b;
  broken.mean.pop_back();
  EXPECT_EQ(CodeOf([&] { Forward(ImageBuffer(8, 8), broken); }), ErrorCode::kInvalidConfig);
}

TEST(BasisFileTest, RoundTripAndErrors) {
  const TransformBasis b = FitBasis(CorpusPatches(4, 2), 4, 6, 0);
  const std::vector<uint8_t> bytes = SerializeBasis(b);
  ASSERT_EQ(bytes.size(), 8u + 4u * (48 + 6 * 48));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PQB1");
  const TransformBasis back = ParseBasis(bytes);
  EXPECT_EQ(back.mean, b.mean);
  EXPECT_EQ(back.rows, b.rows);
  EXPECT_EQ(BasisId(back), BasisId(b));

  std::vector<uint8_t> bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(CodeOf([&] { ParseBasis(bad); }), ErrorCode::kCorruptData);
  bad = bytes;
  bad[4] = 9;
  EXPECT_EQ(CodeOf([&] { ParseBasis(bad); }), ErrorCode::kUnsupportedVersion);
  bad = bytes;
  bad.pop_back();
  EXPECT_EQ(CodeOf([&] { ParseBasis(bad); }), ErrorCode::kCorruptData);
}

}  // namespace
}  // namespace pqmim

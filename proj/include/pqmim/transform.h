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

#ifndef PQMIM_TRANSFORM_H_
#define PQMIM_TRANSFORM_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pqmim/image.h"

namespace pqmim {

// T rows of 3*f*f pixel values, one row per f x f patch in raster order.
// Within a row samples are ordered (py, px, channel).
struct PatchMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  std::span<const float> row(int i) const {
    return std::span<const float>(values).subspan(static_cast<size_t>(i) * cols, cols);
  }
  std::span<float> row(int i) {
    return std::span<float>(values).subspan(static_cast<size_t>(i) * cols, cols);
  }
  // Appends all rows of `other`; column counts must agree.
  void Append(const PatchMatrix& other);
};

// Real-valued latent vectors on a grid_w x grid_h token grid.
struct LatentGrid {
  int grid_w = 0;
  int grid_h = 0;
  int dim = 0;
  std::vector<double> values;

  int size() const { return grid_w * grid_h; }
  std::span<const double> at(int t) const {
    return std::span<const double>(values).subspan(static_cast<size_t>(t) * dim, dim);
  }
  std::span<double> at(int t) {
    return std::span<double>(values).subspan(static_cast<size_t>(t) * dim, dim);
  }
};

// Orthonormal linear patch transform: latent = rows * (patch - mean).
// Parameters are held at float precision so that the file round trip is
// exact and the content id is stable.
struct TransformBasis {
  int patch_size = 0;  // f
  int latent_dim = 0;  // d
  std::vector<float> mean;   // 3*f*f
  std::vector<float> rows;   // d x 3*f*f, row-major

  // Fit metadata; not serialized.
  std::vector<double> eigenvalues;  // top-d, non-increasing
  bool rank_deficient = false;

  int patch_dim() const { return 3 * patch_size * patch_size; }
  std::span<const float> row(int k) const {
    return std::span<const float>(rows).subspan(static_cast<size_t>(k) * patch_dim(),
                                                patch_dim());
  }
};

int GridExtent(int pixels, int patch_size);

// Splits the image into f x f patches. Sizes not divisible by f are
// reflect-padded on the right and bottom. Throws kInvalidInput on an empty
// image or f < 1.
PatchMatrix ExtractPatches(const ImageBuffer& image, int patch_size);

// Mean-centered PCA keeping the top `latent_dim` principal directions.
// Rank-deficient data is completed with a seeded orthonormal fill and
// flagged via `rank_deficient`.
TransformBasis FitBasis(const PatchMatrix& patches, int patch_size, int latent_dim,
                        uint64_t seed);

LatentGrid Forward(const ImageBuffer& image, const TransformBasis& basis);

// Reconstructs, crops to width x height, rounds half up and clamps.
ImageBuffer Inverse(const LatentGrid& latents, const TransformBasis& basis, int width,
                    int height);

// "PQB1" file: version u8, f u8, d u16, then mean and rows as f32 LE.
std::vector<uint8_t> SerializeBasis(const TransformBasis& basis);
TransformBasis ParseBasis(std::span<const uint8_t> bytes);
void SaveBasis(const std::filesystem::path& path, const TransformBasis& basis);
TransformBasis LoadBasis(const std::filesystem::path& path);
uint64_t BasisId(const TransformBasis& basis);

}  // namespace pqmim

#endif  // PQMIM_TRANSFORM_H_

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

#ifndef PQMIM_QUANTIZER_H_
#define PQMIM_QUANTIZER_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pqmim/transform.h"

namespace pqmim {

// M sub-codebooks of V_s centroids over consecutive d/M-dim slices of the
// latent vector. Together they define V_s^M composite centroids.
struct PQCodebook {
  int num_subspaces = 0;  // M
  int codebook_size = 0;  // V_s
  int sub_dim = 0;
  std::vector<float> centroids;  // M x V_s x sub_dim

  int dim() const { return num_subspaces * sub_dim; }
  std::span<const float> centroid(int m, int j) const {
    return std::span<const float>(centroids).subspan(
        (static_cast<size_t>(m) * codebook_size + j) * sub_dim, sub_dim);
  }
};

// Quantization indices: M sub-indices per grid position.
struct TokenGrid {
  int grid_w = 0;
  int grid_h = 0;
  int num_subspaces = 0;
  std::vector<uint16_t> indices;  // (y * w + x) * M + m

  TokenGrid() = default;
  TokenGrid(int w, int h, int m)
      : grid_w(w), grid_h(h), num_subspaces(m),
        indices(static_cast<size_t>(w) * h * m, 0) {}

  int size() const { return grid_w * grid_h; }
  uint16_t at(int t, int m) const { return indices[static_cast<size_t>(t) * num_subspaces + m]; }
  uint16_t& at(int t, int m) { return indices[static_cast<size_t>(t) * num_subspaces + m]; }

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

struct PqTrainOptions {
  int num_subspaces = 2;
  int codebook_size = 256;
  int iterations = 25;
  double tolerance = 1e-6;  // relative distortion change for early exit
  uint64_t seed = 0;
};

struct PqTrainResult {
  PQCodebook codebook;
  // Mean squared error per vector after each assignment step.
  std::vector<double> distortion_history;
};

// Per-subspace Lloyd k-means with k-means++ seeding. `vectors` is a
// row-major N x dim matrix.
PqTrainResult TrainPq(std::span<const double> vectors, int dim,
                      const PqTrainOptions& options);

// Stacks the latent vectors of several grids into one training matrix.
std::vector<double> StackLatents(std::span<const LatentGrid> grids);

// Nearest centroid per subspace, ties to the lowest index. If `distortion`
// is non-null it receives the mean squared error per vector.
TokenGrid Quantize(const LatentGrid& latents, const PQCodebook& codebook,
                   double* distortion = nullptr);

// Throws kCorruptData on an index >= V_s.
LatentGrid Dequantize(const TokenGrid& tokens, const PQCodebook& codebook);

// Mean squared error per vector of quantizing `vectors` with `codebook`.
double QuantizationDistortion(std::span<const double> vectors, const PQCodebook& codebook);

// "PQC1" file: version u8, M u8, V_s u16, sub_dim u16, f32 centroids, CRC32.
std::vector<uint8_t> SerializeCodebook(const PQCodebook& codebook);
PQCodebook ParseCodebook(std::span<const uint8_t> bytes);
void SaveCodebook(const std::filesystem::path& path, const PQCodebook& codebook);
PQCodebook LoadCodebook(const std::filesystem::path& path);
uint64_t CodebookId(const PQCodebook& codebook);

}  // namespace pqmim

#endif  // PQMIM_QUANTIZER_H_

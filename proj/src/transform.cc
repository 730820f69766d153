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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "pqmim/binary_io.h"
#include "pqmim/error.h"
#include "pqmim/random.h"

namespace pqmim {
namespace {

constexpr uint8_t kBasisVersion = 1;
constexpr int kCovarianceChunk = 1024;

// Mirror without repeating the edge sample, periodic for large offsets.
int ReflectIndex(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Flips the vector so that its largest-magnitude entry is positive.
void CanonicalizeSign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;
}

}  // namespace

void PatchMatrix::Append(const PatchMatrix& other) {
  if (rows == 0 && cols == 0) cols = other.cols;
  Require(other.cols == cols, ErrorCode::kInvalidInput, "patch width mismatch");
  values.insert(values.end(), other.values.begin(), other.values.end());
  rows += other.rows;
}

int GridExtent(int pixels, int patch_size) {
  return (pixels + patch_size - 1) / patch_size;
}

PatchMatrix ExtractPatches(const ImageBuffer& image, int patch_size) {
  Require(!image.empty(), ErrorCode::kInvalidInput, "empty image");
  Require(patch_size >= 1, ErrorCode::kInvalidConfig, "patch size must be >= 1");
  const int gw = GridExtent(image.width(), patch_size);
  const int gh = GridExtent(image.height(), patch_size);
  PatchMatrix out;
  out.rows = gw * gh;
  out.cols = 3 * patch_size * patch_size;
  out.values.resize(static_cast<size_t>(out.rows) * out.cols);
  for (int ty = 0; ty < gh; ++ty) {
    for (int tx = 0; tx < gw; ++tx) {
      std::span<float> dst = out.row(ty * gw + tx);
      size_t k = 0;
      for (int py = 0; py < patch_size; ++py) {
        const int y = ReflectIndex(ty * patch_size + py, image.height());
        for (int px = 0; px < patch_size; ++px) {
          const int x = ReflectIndex(tx * patch_size + px, image.width());
          for (int c = 0; c < 3; ++c) dst[k++] = image.at(x, y, c);
        }
      }
    }
  }
  return out;
}

TransformBasis FitBasis(const PatchMatrix& patches, int patch_size, int latent_dim,
                        uint64_t seed) {
  const int dim = 3 * patch_size * patch_size;
  Require(patch_size >= 1, ErrorCode::kInvalidConfig, "patch size must be >= 1");
  Require(patches.cols == dim, ErrorCode::kInvalidConfig,
          "patch matrix width does not match patch size");
  Require(latent_dim >= 1 && latent_dim <= dim, ErrorCode::kInvalidConfig,
          "latent dim must be in [1, 3*f*f]");
  Require(patches.rows >= latent_dim, ErrorCode::kInvalidInput,
          "need at least latent_dim patches to fit the basis");

  const int n = patches.rows;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    auto row = patches.row(i);
    for (int j = 0; j < dim; ++j) mean[j] += row[j];
  }
  mean /= n;

  // Accumulated in fixed row order, chunk by chunk.
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd chunk(kCovarianceChunk, dim);
  for (int start = 0; start < n; start += kCovarianceChunk) {
    const int count = std::min(kCovarianceChunk, n - start);
    for (int i = 0; i < count; ++i) {
      auto row = patches.row(start + i);
      for (int j = 0; j < dim; ++j) chunk(i, j) = row[j] - mean[j];
    }
    auto block = chunk.topRows(count);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Require(solver.info() == Eigen::Success, ErrorCode::kInvalidInput,
          "eigendecomposition failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& evecs = solver.eigenvectors();
  const double top = std::max(evals[dim - 1], 0.0);
  const double tolerance = std::max(top * 1e-10, 1e-12);

  TransformBasis basis;
  basis.patch_size = patch_size;
  basis.latent_dim = latent_dim;
  basis.eigenvalues.resize(latent_dim);

  Eigen::MatrixXd chosen(dim, latent_dim);
  int informative = 0;
  for (int k = 0; k < latent_dim; ++k) {
    const double ev = evals[dim - 1 - k];
    basis.eigenvalues[k] = std::max(ev, 0.0);
    if (ev > tolerance) {
      chosen.col(k) = evecs.col(dim - 1 - k);
      CanonicalizeSign(chosen.col(k));
      ++informative;
    }
  }

  if (informative < latent_dim) {
    basis.rank_deficient = true;
    SplitMix64 rng(seed);
    for (int k = informative; k < latent_dim; ++k) {
      Eigen::VectorXd v(dim);
      double norm = 0.0;
      while (norm < 1e-3) {
        for (int j = 0; j < dim; ++j) v[j] = 2.0 * rng.NextDouble() - 1.0;
        // Two Gram-Schmidt passes for numerical orthogonality.
        for (int pass = 0; pass < 2; ++pass) {
          for (int q = 0; q < k; ++q) v -= chosen.col(q).dot(v) * chosen.col(q);
        }
        norm = v.norm();
      }
      chosen.col(k) = v / norm;
      CanonicalizeSign(chosen.col(k));
    }
  }

  basis.mean.resize(dim);
  for (int j = 0; j < dim; ++j) basis.mean[j] = static_cast<float>(mean[j]);
  basis.rows.resize(static_cast<size_t>(latent_dim) * dim);
  for (int k = 0; k < latent_dim; ++k) {
    for (int j = 0; j < dim; ++j) {
      basis.rows[static_cast<size_t>(k) * dim + j] = static_cast<float>(chosen(j, k));
    }
  }
  return basis;
}

LatentGrid Forward(const ImageBuffer& image, const TransformBasis& basis) {
  const PatchMatrix patches = ExtractPatches(image, basis.patch_size);
  const int dim = basis.patch_dim();
  Require(patches.cols == dim && static_cast<int>(basis.mean.size()) == dim &&
              basis.rows.size() == static_cast<size_t>(basis.latent_dim) * dim,
          ErrorCode::kInvalidConfig, "basis does not match patch dimension");
  LatentGrid out;
  out.grid_w = GridExtent(image.width(), basis.patch_size);
  out.grid_h = GridExtent(image.height(), basis.patch_size);
  out.dim = basis.latent_dim;
  out.values.assign(static_cast<size_t>(patches.rows) * out.dim, 0.0);
  std::vector<double> centered(dim);
  for (int t = 0; t < patches.rows; ++t) {
    auto p = patches.row(t);
    for (int j = 0; j < dim; ++j) centered[j] = static_cast<double>(p[j]) - basis.mean[j];
    auto z = out.at(t);
    for (int k = 0; k < basis.latent_dim; ++k) {
      auto r = basis.row(k);
      double acc = 0.0;
      for (int j = 0; j < dim; ++j) acc += r[j] * centered[j];
      z[k] = acc;
    }
  }
  return out;
}

ImageBuffer Inverse(const LatentGrid& latents, const TransformBasis& basis, int width,
                    int height) {
  const int f = basis.patch_size;
  Require(width >= 1 && height >= 1, ErrorCode::kInvalidConfig, "bad output size");
  Require(latents.dim == basis.latent_dim, ErrorCode::kInvalidConfig,
          "latent dim does not match basis");
  Require(latents.grid_w == GridExtent(width, f) && latents.grid_h == GridExtent(height, f),
          ErrorCode::kInvalidConfig, "latent grid does not match image size");
  const int dim = basis.patch_dim();
  ImageBuffer out(width, height);
  std::vector<double> patch(dim);
  for (int ty = 0; ty < latents.grid_h; ++ty) {
    for (int tx = 0; tx < latents.grid_w; ++tx) {
      auto z = latents.at(ty * latents.grid_w + tx);
      for (int j = 0; j < dim; ++j) patch[j] = basis.mean[j];
      for (int k = 0; k < basis.latent_dim; ++k) {
        auto r = basis.row(k);
        const double c = z[k];
        for (int j = 0; j < dim; ++j) patch[j] += c * r[j];
      }
      size_t idx = 0;
      for (int py = 0; py < f; ++py) {
        const int y = ty * f + py;
        for (int px = 0; px < f; ++px) {
          const int x = tx * f + px;
          for (int c = 0; c < 3; ++c, ++idx) {
            if (x >= width || y >= height) continue;
            const double v = std::floor(patch[idx] + 0.5);
            out.at(x, y, c) = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
          }
        }
      }
    }
  }
  return out;
}

std::vector<uint8_t> SerializeBasis(const TransformBasis& basis) {
  Require(basis.patch_size >= 1 && basis.patch_size <= 255, ErrorCode::kInvalidConfig,
          "patch size does not fit the basis file format");
  Require(basis.latent_dim >= 1 && basis.latent_dim <= 65535, ErrorCode::kInvalidConfig,
          "latent dim does not fit the basis file format");
  ByteWriter w;
  w.PutTag("PQB1");
  w.PutU8(kBasisVersion);
  w.PutU8(static_cast<uint8_t>(basis.patch_size));
  w.PutU16(static_cast<uint16_t>(basis.latent_dim));
  for (float v : basis.mean) w.PutF32(v);
  for (float v : basis.rows) w.PutF32(v);
  return w.Release();
}

TransformBasis ParseBasis(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectTag("PQB1", "basis file");
  const uint8_t version = r.GetU8();
  if (version != kBasisVersion) {
    Fail(ErrorCode::kUnsupportedVersion, "basis version " + std::to_string(version));
  }
  TransformBasis basis;
  basis.patch_size = r.GetU8();
  basis.latent_dim = r.GetU16();
  if (basis.patch_size < 1 || basis.latent_dim < 1 ||
      basis.latent_dim > basis.patch_dim()) {
    Fail(ErrorCode::kCorruptData, "inconsistent basis header");
  }
  const int dim = basis.patch_dim();
  basis.mean.resize(dim);
  for (float& v : basis.mean) v = r.GetF32();
  basis.rows.resize(static_cast<size_t>(basis.latent_dim) * dim);
  for (float& v : basis.rows) v = r.GetF32();
  if (r.remaining() != 0) Fail(ErrorCode::kCorruptData, "trailing bytes in basis file");
  for (float v : basis.rows) {
    if (!std::isfinite(v)) Fail(ErrorCode::kCorruptData, "non-finite basis value");
  }
  return basis;
}

void SaveBasis(const std::filesystem::path& path, const TransformBasis& basis) {
  WriteFileBytes(path, SerializeBasis(basis));
}

TransformBasis LoadBasis(const std::filesystem::path& path) {
  return ParseBasis(ReadFileBytes(path));
}

uint64_t BasisId(const TransformBasis& basis) { return Fnv1a64(SerializeBasis(basis)); }

}  // namespace pqmim

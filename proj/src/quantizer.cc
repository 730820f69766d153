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

#include "pqmim/quantizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pqmim/binary_io.h"
#include "pqmim/error.h"
#include "pqmim/random.h"

namespace pqmim {
namespace {

constexpr uint8_t kCodebookVersion = 1;

template <typename A, typename B>
double SquaredDistance(std::span<const A> a, std::span<const B> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc;
}

// Lloyd state for one subspace. Centroids are kept in double during
// training and rounded to float once at the end.
class SubspaceKMeans {
 public:
  SubspaceKMeans(std::span<const double> vectors, int dim, int offset, int sub_dim, int k)
      : vectors_(vectors),
        dim_(dim),
        offset_(offset),
        sub_dim_(sub_dim),
        k_(k),
        n_(static_cast<int>(vectors.size() / dim)),
        centroids_(static_cast<size_t>(k) * sub_dim),
        assignment_(n_, 0),
        error_(n_, 0.0) {}

  std::span<const double> Point(int i) const {
    return vectors_.subspan(static_cast<size_t>(i) * dim_ + offset_, sub_dim_);
  }
  std::span<double> Centroid(int j) {
    return std::span<double>(centroids_).subspan(static_cast<size_t>(j) * sub_dim_, sub_dim_);
  }

  void SeedPlusPlus(SplitMix64& rng) {
    std::vector<double> best(n_, std::numeric_limits<double>::infinity());
    int chosen = static_cast<int>(rng.Below(n_));
    for (int j = 0; j < k_; ++j) {
      std::copy_n(Point(chosen).begin(), sub_dim_, Centroid(j).begin());
      double total = 0.0;
      for (int i = 0; i < n_; ++i) {
        best[i] = std::min(best[i], SquaredDistance(Point(i), std::span<const double>(Centroid(j))));
        total += best[i];
      }
      if (j + 1 == k_) break;
      if (total <= 0.0) {
        chosen = static_cast<int>(rng.Below(n_));
        continue;
      }
      const double target = rng.NextDouble() * total;
      double running = 0.0;
      chosen = n_ - 1;
      for (int i = 0; i < n_; ++i) {
        running += best[i];
        if (running > target && best[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
  }

  // Returns the summed squared error over all points.
  double Assign() {
    double total = 0.0;
    for (int i = 0; i < n_; ++i) {
      auto p = Point(i);
      int arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k_; ++j) {
        const double d = SquaredDistance(p, std::span<const double>(Centroid(j)));
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      assignment_[i] = arg;
      error_[i] = best;
      total += best;
    }
    return total;
  }

  void Update() {
    std::vector<double> sums(centroids_.size(), 0.0);
    std::vector<int> counts(k_, 0);
    for (int i = 0; i < n_; ++i) {
      const int j = assignment_[i];
      ++counts[j];
      auto p = Point(i);
      for (int c = 0; c < sub_dim_; ++c) sums[static_cast<size_t>(j) * sub_dim_ + c] += p[c];
    }
    std::vector<int> empty;
    for (int j = 0; j < k_; ++j) {
      if (counts[j] == 0) {
        empty.push_back(j);
        continue;
      }
      auto c = Centroid(j);
      for (int d = 0; d < sub_dim_; ++d) c[d] = sums[static_cast<size_t>(j) * sub_dim_ + d] / counts[j];
    }
    if (empty.empty()) return;
    // Re-seed empty clusters on the worst-quantized points, highest error
    // first, ties to the lowest point index.
    std::vector<int> order(n_);
    std::iota(order.begin(), order.end(), 0);
    const size_t take = std::min(empty.size(), order.size());
    std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](int a, int b) {
      if (error_[a] != error_[b]) return error_[a] > error_[b];
      return a < b;
    });
    for (size_t e = 0; e < empty.size(); ++e) {
      const int point = order[e % take];
      std::copy_n(Point(point).begin(), sub_dim_, Centroid(empty[e]).begin());
    }
  }

  void Export(PQCodebook& codebook, int m) const {
    for (int j = 0; j < k_; ++j) {
      for (int d = 0; d < sub_dim_; ++d) {
        codebook.centroids[(static_cast<size_t>(m) * k_ + j) * sub_dim_ + d] =
            static_cast<float>(centroids_[static_cast<size_t>(j) * sub_dim_ + d]);
      }
    }
  }

 private:
  std::span<const double> vectors_;
  int dim_;
  int offset_;
  int sub_dim_;
  int k_;
  int n_;
  std::vector<double> centroids_;
  std::vector<int> assignment_;
  std::vector<double> error_;
};

}  // namespace

PqTrainResult TrainPq(std::span<const double> vectors, int dim,
                      const PqTrainOptions& options) {
  const int m_count = options.num_subspaces;
  const int k = options.codebook_size;
  Require(dim >= 1 && m_count >= 1 && dim % m_count == 0, ErrorCode::kInvalidConfig,
          "latent dim must be divisible by the number of sub-quantizers");
  Require(k >= 2 && k <= 65535, ErrorCode::kInvalidConfig, "V_s must be in [2, 65535]");
  Require(options.iterations >= 1, ErrorCode::kInvalidConfig, "iterations must be >= 1");
  Require(vectors.size() % dim == 0, ErrorCode::kInvalidInput, "ragged training matrix");
  const int n = static_cast<int>(vectors.size() / dim);
  Require(n >= k, ErrorCode::kInvalidInput, "fewer training vectors than centroids");
  for (double v : vectors) {
    Require(std::isfinite(v), ErrorCode::kInvalidInput, "non-finite training vector");
  }

  const int sub_dim = dim / m_count;
  std::vector<SubspaceKMeans> subspaces;
  subspaces.reserve(m_count);
  SplitMix64 rng(options.seed);
  for (int m = 0; m < m_count; ++m) {
    subspaces.emplace_back(vectors, dim, m * sub_dim, sub_dim, k);
    subspaces.back().SeedPlusPlus(rng);
  }

  PqTrainResult result;
  for (int it = 0; it < options.iterations; ++it) {
    double total = 0.0;
    for (auto& s : subspaces) total += s.Assign();
    const double distortion = total / n;
    const bool converged =
        !result.distortion_history.empty() &&
        result.distortion_history.back() - distortion <=
            options.tolerance * std::max(result.distortion_history.back(), 1e-300);
    result.distortion_history.push_back(distortion);
    if (converged || it + 1 == options.iterations) break;
    for (auto& s : subspaces) s.Update();
  }

  PQCodebook& cb = result.codebook;
  cb.num_subspaces = m_count;
  cb.codebook_size = k;
  cb.sub_dim = sub_dim;
  cb.centroids.resize(static_cast<size_t>(m_count) * k * sub_dim);
  for (int m = 0; m < m_count; ++m) subspaces[m].Export(cb, m);
  return result;
}

std::vector<double> StackLatents(std::span<const LatentGrid> grids) {
  std::vector<double> out;
  for (const auto& g : grids) out.insert(out.end(), g.values.begin(), g.values.end());
  return out;
}

namespace {

int NearestCentroid(std::span<const double> x, const PQCodebook& codebook, int m,
                    double* error) {
  int arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < codebook.codebook_size; ++j) {
    const double d = SquaredDistance(x, codebook.centroid(m, j));
    if (d < best) {
      best = d;
      arg = j;
    }
  }
  *error = best;
  return arg;
}

}  // namespace

TokenGrid Quantize(const LatentGrid& latents, const PQCodebook& codebook, double* distortion) {
  Require(latents.dim == codebook.dim(), ErrorCode::kInvalidConfig,
          "latent dim does not match codebook");
  TokenGrid tokens(latents.grid_w, latents.grid_h, codebook.num_subspaces);
  double total = 0.0;
  for (int t = 0; t < latents.size(); ++t) {
    auto z = latents.at(t);
    for (int m = 0; m < codebook.num_subspaces; ++m) {
      double err = 0.0;
      tokens.at(t, m) = static_cast<uint16_t>(
          NearestCentroid(z.subspan(static_cast<size_t>(m) * codebook.sub_dim, codebook.sub_dim),
                          codebook, m, &err));
      total += err;
    }
  }
  if (distortion != nullptr) *distortion = latents.size() > 0 ? total / latents.size() : 0.0;
  return tokens;
}

LatentGrid Dequantize(const TokenGrid& tokens, const PQCodebook& codebook) {
  Require(tokens.num_subspaces == codebook.num_subspaces, ErrorCode::kInvalidConfig,
          "token grid does not match codebook");
  LatentGrid out;
  out.grid_w = tokens.grid_w;
  out.grid_h = tokens.grid_h;
  out.dim = codebook.dim();
  out.values.resize(static_cast<size_t>(out.size()) * out.dim);
  for (int t = 0; t < tokens.size(); ++t) {
    auto z = out.at(t);
    for (int m = 0; m < codebook.num_subspaces; ++m) {
      const int j = tokens.at(t, m);
      if (j >= codebook.codebook_size) {
        Fail(ErrorCode::kCorruptData, "token index out of range");
      }
      auto c = codebook.centroid(m, j);
      std::copy(c.begin(), c.end(), z.begin() + static_cast<size_t>(m) * codebook.sub_dim);
    }
  }
  return out;
}

double QuantizationDistortion(std::span<const double> vectors, const PQCodebook& codebook) {
  const int dim = codebook.dim();
  Require(dim > 0 && vectors.size() % dim == 0, ErrorCode::kInvalidConfig,
          "vector matrix does not match codebook");
  const size_t n = vectors.size() / dim;
  if (n == 0) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    auto z = vectors.subspan(i * dim, dim);
    for (int m = 0; m < codebook.num_subspaces; ++m) {
      double err = 0.0;
      NearestCentroid(z.subspan(static_cast<size_t>(m) * codebook.sub_dim, codebook.sub_dim),
                      codebook, m, &err);
      total += err;
    }
  }
  return total / n;
}

std::vector<uint8_t> SerializeCodebook(const PQCodebook& codebook) {
  Require(codebook.num_subspaces >= 1 && codebook.num_subspaces <= 255 &&
              codebook.codebook_size >= 2 && codebook.codebook_size <= 65535 &&
              codebook.sub_dim >= 1 && codebook.sub_dim <= 65535,
          ErrorCode::kInvalidConfig, "codebook shape does not fit the file format");
  ByteWriter w;
  w.PutTag("PQC1");
  w.PutU8(kCodebookVersion);
  w.PutU8(static_cast<uint8_t>(codebook.num_subspaces));
  w.PutU16(static_cast<uint16_t>(codebook.codebook_size));
  w.PutU16(static_cast<uint16_t>(codebook.sub_dim));
  for (float v : codebook.centroids) w.PutF32(v);
  w.PutU32(Crc32(w.bytes()));
  return w.Release();
}

PQCodebook ParseCodebook(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectTag("PQC1", "codebook file");
  const uint8_t version = r.GetU8();
  if (version != kCodebookVersion) {
    Fail(ErrorCode::kUnsupportedVersion, "codebook version " + std::to_string(version));
  }
  PQCodebook cb;
  cb.num_subspaces = r.GetU8();
  cb.codebook_size = r.GetU16();
  cb.sub_dim = r.GetU16();
  if (cb.num_subspaces < 1 || cb.codebook_size < 2 || cb.sub_dim < 1) {
    Fail(ErrorCode::kCorruptData, "inconsistent codebook header");
  }
  cb.centroids.resize(static_cast<size_t>(cb.num_subspaces) * cb.codebook_size * cb.sub_dim);
  for (float& v : cb.centroids) v = r.GetF32();
  const size_t body = r.position();
  const uint32_t crc = r.GetU32();
  if (r.remaining() != 0) Fail(ErrorCode::kCorruptData, "trailing bytes in codebook file");
  if (crc != Crc32(bytes.first(body))) Fail(ErrorCode::kCorruptData, "codebook CRC mismatch");
  return cb;
}

void SaveCodebook(const std::filesystem::path& path, const PQCodebook& codebook) {
  WriteFileBytes(path, SerializeCodebook(codebook));
}

PQCodebook LoadCodebook(const std::filesystem::path& path) {
  return ParseCodebook(ReadFileBytes(path));
}

uint64_t CodebookId(const PQCodebook& codebook) {
  return Fnv1a64(SerializeCodebook(codebook));
}

}  // namespace pqmim

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

#include "pqmim/entropy_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pqmim/binary_io.h"
#include "pqmim/error.h"
#include "pqmim/random.h"

namespace pqmim {
namespace {

constexpr uint8_t kMarginalVersion = 1;
constexpr uint8_t kContextVersion = 1;
constexpr double kInitScale = 0.05;

// Four independent accumulators; fixed summation order.
double Dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void Axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void SoftmaxInPlace(std::span<double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& v : logits) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : logits) v /= total;
}

}  // namespace

IntegerCdf QuantizeCdf(std::span<const double> p) {
  const size_t n = p.size();
  Require(n >= 1 && n <= kCdfTotal, ErrorCode::kInvalidConfig,
          "alphabet does not fit the CDF precision");
  double sum = 0.0;
  for (double v : p) {
    Require(std::isfinite(v) && v >= 0.0, ErrorCode::kInvalidInput,
            "probabilities must be finite and non-negative");
    sum += v;
  }
  Require(sum > 0.0, ErrorCode::kInvalidInput, "probabilities sum to zero");

  const int64_t budget = static_cast<int64_t>(kCdfTotal) - static_cast<int64_t>(n);
  std::vector<int64_t> width(n);
  std::vector<double> remainder(n);
  int64_t assigned = 0;
  for (size_t i = 0; i < n; ++i) {
    const double scaled = p[i] / sum * static_cast<double>(budget);
    const double base = std::floor(scaled);
    width[i] = static_cast<int64_t>(base);
    remainder[i] = scaled - base;
    assigned += width[i];
  }
  int64_t leftover = budget - assigned;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  if (leftover > 0) {
    const auto cut = order.begin() + std::min<int64_t>(leftover, static_cast<int64_t>(n));
    std::partial_sort(order.begin(), cut, order.end(), [&](size_t a, size_t b) {
      if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
      return a < b;
    });
    for (auto it = order.begin(); it != cut; ++it) ++width[*it];
  } else if (leftover < 0) {
    // Only reachable through floating-point slop in the scaled sum.
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (width[a] != width[b]) return width[a] > width[b];
      return a < b;
    });
    for (size_t k = 0; leftover < 0; k = (k + 1) % n) {
      if (width[order[k]] > 0) {
        --width[order[k]];
        ++leftover;
      }
    }
  }

  IntegerCdf cdf(n + 1, 0);
  for (size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + static_cast<uint32_t>(width[i] + 1);
  return cdf;
}

// ---------------------------------------------------------------------------

double MarginalModel::probability(int m, int symbol) const {
  uint64_t total = 0;
  for (int j = 0; j < alphabet; ++j) total += counts[static_cast<size_t>(m) * alphabet + j];
  return (static_cast<double>(counts[static_cast<size_t>(m) * alphabet + symbol]) + 1.0) /
         (static_cast<double>(total) + alphabet);
}

std::vector<double> MarginalModel::Distribution(int m) const {
  uint64_t total = 0;
  for (int j = 0; j < alphabet; ++j) total += counts[static_cast<size_t>(m) * alphabet + j];
  std::vector<double> p(alphabet);
  const double denom = static_cast<double>(total) + alphabet;
  for (int j = 0; j < alphabet; ++j) {
    p[j] = (static_cast<double>(counts[static_cast<size_t>(m) * alphabet + j]) + 1.0) / denom;
  }
  return p;
}

MarginalModel FitMarginal(std::span<const TokenGrid> corpus, int num_heads, int alphabet) {
  Require(num_heads >= 1 && alphabet >= 1, ErrorCode::kInvalidConfig, "bad marginal shape");
  MarginalModel model;
  model.num_heads = num_heads;
  model.alphabet = alphabet;
  model.counts.assign(static_cast<size_t>(num_heads) * alphabet, 0);
  for (const TokenGrid& grid : corpus) {
    Require(grid.num_subspaces == num_heads, ErrorCode::kInvalidInput,
            "token grid has the wrong number of sub-indices");
    for (int t = 0; t < grid.size(); ++t) {
      for (int m = 0; m < num_heads; ++m) {
        const int j = grid.at(t, m);
        Require(j < alphabet, ErrorCode::kInvalidInput, "token index out of range");
        ++model.counts[static_cast<size_t>(m) * alphabet + j];
      }
    }
  }
  return model;
}

std::vector<uint8_t> SerializeMarginal(const MarginalModel& model) {
  Require(model.num_heads >= 1 && model.num_heads <= 255 && model.alphabet >= 1 &&
              model.alphabet <= 65535,
          ErrorCode::kInvalidConfig, "marginal shape does not fit the file format");
  ByteWriter w;
  w.PutTag("PQMH");
  w.PutU8(kMarginalVersion);
  w.PutU8(static_cast<uint8_t>(model.num_heads));
  w.PutU16(static_cast<uint16_t>(model.alphabet));
  for (uint64_t c : model.counts) w.PutU64(c);
  w.PutU32(Crc32(w.bytes()));
  return w.Release();
}

MarginalModel ParseMarginal(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectTag("PQMH", "marginal model file");
  const uint8_t version = r.GetU8();
  if (version != kMarginalVersion) {
    Fail(ErrorCode::kUnsupportedVersion, "marginal model version " + std::to_string(version));
  }
  MarginalModel model;
  model.num_heads = r.GetU8();
  model.alphabet = r.GetU16();
  if (model.num_heads < 1 || model.alphabet < 1) {
    Fail(ErrorCode::kCorruptData, "inconsistent marginal header");
  }
  model.counts.resize(static_cast<size_t>(model.num_heads) * model.alphabet);
  for (uint64_t& c : model.counts) c = r.GetU64();
  const size_t body = r.position();
  const uint32_t crc = r.GetU32();
  if (r.remaining() != 0) Fail(ErrorCode::kCorruptData, "trailing bytes in marginal file");
  if (crc != Crc32(bytes.first(body))) Fail(ErrorCode::kCorruptData, "marginal CRC mismatch");
  return model;
}

void SaveMarginal(const std::filesystem::path& path, const MarginalModel& model) {
  WriteFileBytes(path, SerializeMarginal(model));
}

MarginalModel LoadMarginal(const std::filesystem::path& path) {
  return ParseMarginal(ReadFileBytes(path));
}

uint64_t MarginalId(const MarginalModel& model) { return Fnv1a64(SerializeMarginal(model)); }

// ---------------------------------------------------------------------------

std::vector<std::pair<int, int>> ContextModelShape::DefaultOffsets() {
  return {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1},
          {0, 1},   {1, 1},  {0, -2}, {-2, 0}, {2, 0}, {0, 2}};
}

struct ContextModel::Activations {
  std::vector<double> input;   // K*e
  std::vector<double> hidden;  // hdim, after tanh
  std::vector<double> probs;   // M*V
  std::vector<int> neighbor;   // K: neighbor position or -1 for the mask
};

ContextModel::ContextModel(ContextModelShape shape) : shape_(std::move(shape)) {
  Require(shape_.num_heads >= 1 && shape_.alphabet >= 2 && shape_.embed_dim >= 1 &&
              shape_.hidden_dim >= 1 && shape_.num_offsets() >= 1,
          ErrorCode::kInvalidConfig, "invalid context model shape");
  ComputeLayout();
  params_.assign(layout_.total, 0.0);
}

void ContextModel::ComputeLayout() {
  const size_t m = shape_.num_heads;
  const size_t v = shape_.alphabet;
  const size_t e = shape_.embed_dim;
  const size_t h = shape_.hidden_dim;
  layout_.embeddings = 0;
  layout_.mask = layout_.embeddings + m * v * e;
  layout_.w1 = layout_.mask + e;
  layout_.b1 = layout_.w1 + static_cast<size_t>(shape_.input_dim()) * h;
  layout_.heads = layout_.b1 + h;
  layout_.head_bias = layout_.heads + m * h * v;
  layout_.total = layout_.head_bias + m * v;
}

ContextModel ContextModel::Initialize(ContextModelShape shape, uint64_t seed,
                                      bool random_heads) {
  ContextModel model(std::move(shape));
  SplitMix64 rng(seed);
  const size_t end = random_heads ? model.layout_.total : model.layout_.heads;
  for (size_t i = 0; i < end; ++i) {
    model.params_[i] = (2.0 * rng.NextDouble() - 1.0) * kInitScale;
  }
  return model;
}

void SeedEmbeddingsFromCodebook(ContextModel& model, const PQCodebook& codebook,
                                double scale) {
  const ContextModelShape& shape = model.shape();
  Require(shape.num_heads == codebook.num_subspaces && shape.alphabet == codebook.codebook_size,
          ErrorCode::kInvalidConfig, "context model does not match the codebook");
  const int e = shape.embed_dim;
  const int sub = codebook.sub_dim;
  const int v = codebook.codebook_size;
  for (int m = 0; m < codebook.num_subspaces; ++m) {
    for (int i = 0; i < std::min(sub, e); ++i) {
      double mean = 0.0;
      for (int j = 0; j < v; ++j) mean += codebook.centroid(m, j)[i];
      mean /= v;
      double var = 0.0;
      for (int j = 0; j < v; ++j) {
        const double d = codebook.centroid(m, j)[i] - mean;
        var += d * d;
      }
      const double inv = var > 0.0 ? scale / std::sqrt(var / v) : 0.0;
      const int slot = (m * sub + i) % e;
      for (int j = 0; j < v; ++j) {
        model.embedding(m, j)[slot] = (codebook.centroid(m, j)[i] - mean) * inv;
      }
    }
  }
}

std::span<double> ContextModel::embedding(int m, int symbol) {
  const size_t e = shape_.embed_dim;
  return std::span<double>(params_).subspan(
      layout_.embeddings + (static_cast<size_t>(m) * shape_.alphabet + symbol) * e, e);
}

std::span<double> ContextModel::mask_embedding() {
  return std::span<double>(params_).subspan(layout_.mask, shape_.embed_dim);
}

std::span<double> ContextModel::hidden_weights() {
  return std::span<double>(params_).subspan(
      layout_.w1, static_cast<size_t>(shape_.input_dim()) * shape_.hidden_dim);
}

std::span<double> ContextModel::hidden_bias() {
  return std::span<double>(params_).subspan(layout_.b1, shape_.hidden_dim);
}

std::span<double> ContextModel::head_weights(int m) {
  const size_t block = static_cast<size_t>(shape_.hidden_dim) * shape_.alphabet;
  return std::span<double>(params_).subspan(layout_.heads + m * block, block);
}

std::span<double> ContextModel::head_bias(int m) {
  return std::span<double>(params_).subspan(
      layout_.head_bias + static_cast<size_t>(m) * shape_.alphabet, shape_.alphabet);
}

void ContextModel::Forward(const TokenGrid& grid, std::span<const uint8_t> observed,
                           int position, Activations& act) const {
  const int e = shape_.embed_dim;
  const int hdim = shape_.hidden_dim;
  const int v_count = shape_.alphabet;
  const int k_count = shape_.num_offsets();
  const double* p = params_.data();
  act.input.assign(static_cast<size_t>(k_count) * e, 0.0);
  act.hidden.resize(hdim);
  act.probs.resize(static_cast<size_t>(shape_.num_heads) * v_count);
  act.neighbor.resize(k_count);

  const int x = position % grid.grid_w;
  const int y = position / grid.grid_w;
  for (int k = 0; k < k_count; ++k) {
    const int nx = x + shape_.offsets[k].first;
    const int ny = y + shape_.offsets[k].second;
    double* feature = &act.input[static_cast<size_t>(k) * e];
    int q = -1;
    if (nx >= 0 && ny >= 0 && nx < grid.grid_w && ny < grid.grid_h) {
      const int candidate = ny * grid.grid_w + nx;
      if (observed[candidate]) q = candidate;
    }
    act.neighbor[k] = q;
    if (q < 0) {
      std::copy_n(p + layout_.mask, e, feature);
      continue;
    }
    for (int m = 0; m < shape_.num_heads; ++m) {
      const double* emb =
          p + layout_.embeddings + (static_cast<size_t>(m) * v_count + grid.at(q, m)) * e;
      for (int c = 0; c < e; ++c) feature[c] += emb[c];
    }
  }

  std::copy_n(p + layout_.b1, hdim, act.hidden.begin());
  const double* w1 = p + layout_.w1;
  for (int i = 0; i < k_count * e; ++i) {
    Axpy(act.input[i], w1 + static_cast<size_t>(i) * hdim, act.hidden.data(), hdim);
  }
  for (double& h : act.hidden) h = std::tanh(h);

  for (int m = 0; m < shape_.num_heads; ++m) {
    double* logits = &act.probs[static_cast<size_t>(m) * v_count];
    std::copy_n(p + layout_.head_bias + static_cast<size_t>(m) * v_count, v_count, logits);
    const double* wh = p + layout_.heads + static_cast<size_t>(m) * hdim * v_count;
    for (int j = 0; j < hdim; ++j) {
      Axpy(act.hidden[j], wh + static_cast<size_t>(j) * v_count, logits, v_count);
    }
    SoftmaxInPlace(std::span<double>(logits, v_count));
  }
}

Predictions ContextModel::Predict(const TokenGrid& grid, std::span<const uint8_t> observed,
                                  std::span<const int> positions) const {
  Require(grid.num_subspaces == shape_.num_heads, ErrorCode::kInvalidConfig,
          "token grid does not match the context model");
  Require(observed.size() == static_cast<size_t>(grid.size()), ErrorCode::kInvalidInput,
          "observed mask does not match the grid");
  Predictions out;
  out.num_heads = shape_.num_heads;
  out.alphabet = shape_.alphabet;
  out.probabilities.resize(positions.size() * out.block_size());
  Activations act;
  for (size_t i = 0; i < positions.size(); ++i) {
    Require(positions[i] >= 0 && positions[i] < grid.size(), ErrorCode::kInvalidInput,
            "queried position outside the grid");
    Forward(grid, observed, positions[i], act);
    std::copy(act.probs.begin(), act.probs.end(),
              out.probabilities.begin() + i * out.block_size());
  }
  return out;
}

double ContextModel::LossAndGradient(std::span<const MaskedExample> examples,
                                     std::vector<double>* gradient) const {
  size_t target_count = 0;
  for (const auto& ex : examples) target_count += ex.targets.size();
  if (gradient != nullptr) gradient->assign(params_.size(), 0.0);
  if (target_count == 0) return 0.0;

  const int e = shape_.embed_dim;
  const int hdim = shape_.hidden_dim;
  const int v_count = shape_.alphabet;
  const int m_count = shape_.num_heads;
  const int in_dim = shape_.input_dim();
  const double scale = 1.0 / (static_cast<double>(target_count) * m_count);
  const double* p = params_.data();

  Activations act;
  std::vector<double> d_hidden(hdim);
  std::vector<double> d_input(in_dim);
  double loss = 0.0;
  for (const auto& ex : examples) {
    const TokenGrid& grid = *ex.grid;
    Require(grid.num_subspaces == m_count, ErrorCode::kInvalidInput,
            "token grid does not match the context model");
    Require(ex.observed.size() == static_cast<size_t>(grid.size()), ErrorCode::kInvalidInput,
            "observed mask does not match the grid");
    for (int t : ex.targets) {
      Require(t >= 0 && t < grid.size(), ErrorCode::kInvalidInput, "target outside the grid");
      Forward(grid, ex.observed, t, act);
      for (int m = 0; m < m_count; ++m) {
        loss -= std::log(std::max(act.probs[static_cast<size_t>(m) * v_count + grid.at(t, m)],
                                  1e-300));
      }
      if (gradient == nullptr) continue;
      double* g = gradient->data();

      // Softmax cross-entropy: d(logits) = scale * (p - onehot).
      std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
      for (int m = 0; m < m_count; ++m) {
        double* dl = &act.probs[static_cast<size_t>(m) * v_count];
        dl[grid.at(t, m)] -= 1.0;
        for (int v = 0; v < v_count; ++v) dl[v] *= scale;
        Axpy(1.0, dl, g + layout_.head_bias + static_cast<size_t>(m) * v_count, v_count);
        const size_t head = layout_.heads + static_cast<size_t>(m) * hdim * v_count;
        for (int j = 0; j < hdim; ++j) {
          Axpy(act.hidden[j], dl, g + head + static_cast<size_t>(j) * v_count, v_count);
          d_hidden[j] += Dot(p + head + static_cast<size_t>(j) * v_count, dl, v_count);
        }
      }
      for (int j = 0; j < hdim; ++j) {
        d_hidden[j] *= 1.0 - act.hidden[j] * act.hidden[j];
      }
      Axpy(1.0, d_hidden.data(), g + layout_.b1, hdim);
      for (int i = 0; i < in_dim; ++i) {
        const size_t row = layout_.w1 + static_cast<size_t>(i) * hdim;
        Axpy(act.input[i], d_hidden.data(), g + row, hdim);
        d_input[i] = Dot(p + row, d_hidden.data(), hdim);
      }
      for (int k = 0; k < shape_.num_offsets(); ++k) {
        const double* dk = &d_input[static_cast<size_t>(k) * e];
        const int q = act.neighbor[k];
        if (q < 0) {
          Axpy(1.0, dk, g + layout_.mask, e);
          continue;
        }
        for (int m = 0; m < m_count; ++m) {
          Axpy(1.0, dk,
               g + layout_.embeddings + (static_cast<size_t>(m) * v_count + grid.at(q, m)) * e,
               e);
        }
      }
    }
  }
  return loss * scale;
}

void ContextModel::RoundToFloat() {
  for (double& v : params_) v = static_cast<double>(static_cast<float>(v));
}

MaskedExample RandomMask(const TokenGrid& grid, SplitMix64& rng) {
  const int total = grid.size();
  MaskedExample ex;
  ex.grid = &grid;
  ex.observed.assign(total, 1);
  const double r = rng.NextDouble();
  const int hidden = std::min(total, static_cast<int>(std::ceil(r * total)));
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `hidden` entries are a uniform subset.
  for (int i = 0; i < hidden; ++i) {
    const int j = i + static_cast<int>(rng.Below(total - i));
    std::swap(order[i], order[j]);
  }
  ex.targets.assign(order.begin(), order.begin() + hidden);
  std::sort(ex.targets.begin(), ex.targets.end());
  for (int t : ex.targets) ex.observed[t] = 0;
  return ex;
}

double TrainStep(ContextModel& model, std::span<const TokenGrid> batch, double learning_rate,
                 uint64_t seed) {
  Require(!batch.empty(), ErrorCode::kInvalidInput, "empty training batch");
  SplitMix64 rng(seed);
  std::vector<MaskedExample> examples;
  examples.reserve(batch.size());
  for (const TokenGrid& grid : batch) examples.push_back(RandomMask(grid, rng));
  std::vector<double> gradient;
  const double loss = model.LossAndGradient(examples, &gradient);
  if (learning_rate != 0.0) {
    auto params = model.mutable_params();
    for (size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * gradient[i];
  }
  return loss;
}

ContextTrainReport TrainContextModel(ContextModel& model, std::span<const TokenGrid> corpus,
                                     const ContextTrainOptions& options) {
  Require(options.batch_size >= 1, ErrorCode::kInvalidConfig, "batch size must be >= 1");
  Require(options.epochs >= 0 && options.steps >= 0, ErrorCode::kInvalidConfig,
          "negative training length");
  ContextTrainReport report;
  if (corpus.empty()) {
    model.RoundToFloat();
    return report;
  }
  const int n = static_cast<int>(corpus.size());
  const int steps_per_epoch = (n + options.batch_size - 1) / options.batch_size;
  const int total_steps = options.steps > 0 ? options.steps : options.epochs * steps_per_epoch;

  SplitMix64 rng(options.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();
  std::vector<TokenGrid> batch;
  for (int step = 0; step < total_steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < std::min(options.batch_size, n)) {
      if (cursor == order.size()) {
        rng.Shuffle(std::span<int>(order));
        cursor = 0;
      }
      batch.push_back(corpus[order[cursor++]]);
    }
    const int quarter = std::min(3, 4 * step / total_steps);
    const double lr = options.learning_rate * std::ldexp(1.0, -quarter);
    const double loss = TrainStep(model, batch, lr, rng.NextU64());
    if (step == 0) report.first_loss = loss;
    report.last_loss = loss;
    ++report.steps;
    if (options.on_step) options.on_step(step + 1, total_steps, loss);
  }
  model.RoundToFloat();
  return report;
}

double CrossEntropyBitsPerToken(const ContextModel& model,
                                std::span<const MaskedExample> examples) {
  size_t count = 0;
  for (const auto& ex : examples) count += ex.targets.size();
  if (count == 0) return 0.0;
  const double nats = model.LossAndGradient(examples, nullptr);
  return nats * model.shape().num_heads / std::log(2.0);
}

double MarginalBitsPerToken(const MarginalModel& model, std::span<const MaskedExample> examples) {
  double bits = 0.0;
  size_t count = 0;
  std::vector<std::vector<double>> dists;
  for (int m = 0; m < model.num_heads; ++m) dists.push_back(model.Distribution(m));
  for (const auto& ex : examples) {
    for (int t : ex.targets) {
      for (int m = 0; m < model.num_heads; ++m) bits -= std::log2(dists[m][ex.grid->at(t, m)]);
      ++count;
    }
  }
  return count == 0 ? 0.0 : bits / count;
}

namespace {

// Header plus float parameters; the CRC and id are computed over this.
std::vector<uint8_t> SerializeContextBody(const ContextModel& model) {
  const ContextModelShape& s = model.shape();
  Require(s.num_heads <= 255 && s.alphabet <= 65535 && s.embed_dim <= 65535 &&
              s.hidden_dim <= 65535 && s.num_offsets() <= 255,
          ErrorCode::kInvalidConfig, "context model shape does not fit the file format");
  ByteWriter w;
  w.PutTag("PQM1M");
  w.PutU8(kContextVersion);
  w.PutU8(static_cast<uint8_t>(s.num_heads));
  w.PutU16(static_cast<uint16_t>(s.alphabet));
  w.PutU16(static_cast<uint16_t>(s.embed_dim));
  w.PutU16(static_cast<uint16_t>(s.hidden_dim));
  w.PutU8(static_cast<uint8_t>(s.num_offsets()));
  for (const auto& [dx, dy] : s.offsets) {
    Require(dx >= -128 && dx <= 127 && dy >= -128 && dy <= 127, ErrorCode::kInvalidConfig,
            "neighbor offset does not fit in i8");
    w.PutI8(static_cast<int8_t>(dx));
    w.PutI8(static_cast<int8_t>(dy));
  }
  for (double v : model.params()) w.PutF32(static_cast<float>(v));
  return w.Release();
}

}  // namespace

std::vector<uint8_t> SerializeContextModel(const ContextModel& model) {
  std::vector<uint8_t> body = SerializeContextBody(model);
  ByteWriter w;
  w.PutBytes(body);
  w.PutU32(Crc32(body));
  w.PutU64(Fnv1a64(body));
  return w.Release();
}

ContextModel ParseContextModel(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  r.ExpectTag("PQM1M", "context model file");
  const uint8_t version = r.GetU8();
  if (version != kContextVersion) {
    Fail(ErrorCode::kUnsupportedVersion, "context model version " + std::to_string(version));
  }
  ContextModelShape shape;
  shape.num_heads = r.GetU8();
  shape.alphabet = r.GetU16();
  shape.embed_dim = r.GetU16();
  shape.hidden_dim = r.GetU16();
  const int k = r.GetU8();
  shape.offsets.clear();
  for (int i = 0; i < k; ++i) {
    const int dx = r.GetI8();
    const int dy = r.GetI8();
    shape.offsets.emplace_back(dx, dy);
  }
  if (shape.num_heads < 1 || shape.alphabet < 2 || shape.embed_dim < 1 ||
      shape.hidden_dim < 1 || k < 1) {
    Fail(ErrorCode::kCorruptData, "inconsistent context model header");
  }
  ContextModel model(std::move(shape));
  for (double& v : model.mutable_params()) {
    v = r.GetF32();
    if (!std::isfinite(v)) Fail(ErrorCode::kCorruptData, "non-finite model parameter");
  }
  const size_t body = r.position();
  const uint32_t crc = r.GetU32();
  const uint64_t id = r.GetU64();
  if (r.remaining() != 0) Fail(ErrorCode::kCorruptData, "trailing bytes in context model file");
  if (crc != Crc32(bytes.first(body))) Fail(ErrorCode::kCorruptData, "context model CRC mismatch");
  if (id != Fnv1a64(bytes.first(body))) {
    Fail(ErrorCode::kCorruptData, "context model id does not match its parameters");
  }
  return model;
}

void SaveContextModel(const std::filesystem::path& path, const ContextModel& model) {
  WriteFileBytes(path, SerializeContextModel(model));
}

ContextModel LoadContextModel(const std::filesystem::path& path) {
  return ParseContextModel(ReadFileBytes(path));
}

uint64_t ContextModelId(const ContextModel& model) {
  return Fnv1a64(SerializeContextBody(model));
}

}  // namespace pqmim

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

#ifndef PQMIM_ENTROPY_MODEL_H_
#define PQMIM_ENTROPY_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "pqmim/quantizer.h"
#include "pqmim/random.h"

namespace pqmim {

inline constexpr int kCdfPrecisionBits = 16;
inline constexpr uint32_t kCdfTotal = 1u << kCdfPrecisionBits;

// Cumulative frequencies: V+1 entries from 0 to kCdfTotal, each symbol at
// least one count wide.
using IntegerCdf = std::vector<uint32_t>;

// Largest-remainder rounding of `p` to kCdfTotal with a floor of one count
// per symbol. `p` is renormalized by its sum.
IntegerCdf QuantizeCdf(std::span<const double> p);

// ---------------------------------------------------------------------------
// Stage-1 model: add-one smoothed histogram per sub-quantizer.

struct MarginalModel {
  int num_heads = 0;  // M
  int alphabet = 0;   // V_s
  std::vector<uint64_t> counts;  // M x V_s

  // (count + 1) / (N + V_s) for head m.
  double probability(int m, int symbol) const;
  std::vector<double> Distribution(int m) const;
};

MarginalModel FitMarginal(std::span<const TokenGrid> corpus, int num_heads, int alphabet);

// "PQMH" file: version u8, M u8, V_s u16, u64 counts, CRC32.
std::vector<uint8_t> SerializeMarginal(const MarginalModel& model);
MarginalModel ParseMarginal(std::span<const uint8_t> bytes);
void SaveMarginal(const std::filesystem::path& path, const MarginalModel& model);
MarginalModel LoadMarginal(const std::filesystem::path& path);
uint64_t MarginalId(const MarginalModel& model);

// ---------------------------------------------------------------------------
// Masked context model for stages >= 2. One parameter set serves every stage.
//
// For a queried position each of the K neighbor offsets contributes an
// e-dim feature: the sum of the M symbol embeddings of an observed
// neighbor, or the mask embedding when the neighbor is unobserved or off the
// grid. The K*e concatenation goes through one tanh hidden layer and M
// linear softmax heads.

struct ContextModelShape {
  int num_heads = 2;     // M
  int alphabet = 256;    // V_s
  int embed_dim = 16;    // e
  int hidden_dim = 128;  // hdim
  std::vector<std::pair<int, int>> offsets = DefaultOffsets();  // (dx, dy)

  // 8-neighborhood at distance 1 plus the axial offsets at distance 2.
  static std::vector<std::pair<int, int>> DefaultOffsets();

  int num_offsets() const { return static_cast<int>(offsets.size()); }
  int input_dim() const { return num_offsets() * embed_dim; }
};

// Per-position output of ContextModel::Predict: M distributions over V_s.
struct Predictions {
  int num_heads = 0;
  int alphabet = 0;
  std::vector<double> probabilities;  // positions x M x V_s

  size_t block_size() const { return static_cast<size_t>(num_heads) * alphabet; }
  size_t count() const { return block_size() == 0 ? 0 : probabilities.size() / block_size(); }
  std::span<const double> block(size_t i) const {
    return std::span<const double>(probabilities).subspan(i * block_size(), block_size());
  }
  std::span<const double> head(size_t i, int m) const {
    return block(i).subspan(static_cast<size_t>(m) * alphabet, alphabet);
  }
};

// One training/evaluation example: a grid, which positions are visible to
// the model, and which positions the loss is computed on.
struct MaskedExample {
  const TokenGrid* grid = nullptr;
  std::vector<uint8_t> observed;  // one flag per position
  std::vector<int> targets;
};

class ContextModel {
 public:
  ContextModel() = default;
  // All parameters zero: every prediction is uniform.
  explicit ContextModel(ContextModelShape shape);

  // Uniform(-0.05, 0.05) initialization. Output heads start at zero unless
  // `random_heads` is set, so an untrained model predicts uniform
  // distributions.
  static ContextModel Initialize(ContextModelShape shape, uint64_t seed,
                                 bool random_heads = false);

  const ContextModelShape& shape() const { return shape_; }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  size_t num_params() const { return params_.size(); }

  // Parameter views.
  std::span<double> embedding(int m, int symbol);
  std::span<double> mask_embedding();
  std::span<double> hidden_weights();  // input_dim x hidden_dim
  std::span<double> hidden_bias();
  std::span<double> head_weights(int m);  // hidden_dim x alphabet
  std::span<double> head_bias(int m);

  // `observed` has one flag per grid position. Tokens at unobserved
  // positions are never read. Throws kInvalidInput for positions outside
  // the grid.
  Predictions Predict(const TokenGrid& grid, std::span<const uint8_t> observed,
                      std::span<const int> positions) const;

  // Mean cross-entropy (nats) over all targets and heads. When `gradient`
  // is non-null it is resized to num_params() and receives d(loss)/d(param).
  double LossAndGradient(std::span<const MaskedExample> examples,
                         std::vector<double>* gradient) const;

  // Rounds every parameter to float precision, matching the model file.
  void RoundToFloat();

 private:
  struct Layout {
    size_t embeddings = 0;
    size_t mask = 0;
    size_t w1 = 0;
    size_t b1 = 0;
    size_t heads = 0;
    size_t head_bias = 0;
    size_t total = 0;
  };
  struct Activations;

  void ComputeLayout();
  void Forward(const TokenGrid& grid, std::span<const uint8_t> observed, int position,
               Activations& act) const;

  ContextModelShape shape_;
  Layout layout_;
  std::vector<double> params_;
};

// Overwrites the symbol embeddings with standardized centroid coordinates
// times `scale`: coordinate i of sub-quantizer m goes to embedding slot
// (m * sub_dim + i) mod e. Neighbors with similar latents then start with
// similar features. Other parameters are untouched.
void SeedEmbeddingsFromCodebook(ContextModel& model, const PQCodebook& codebook,
                                double scale = 0.5);

// Draws r ~ U(0,1) and hides ceil(r*T) uniformly chosen positions of `grid`;
// the hidden positions are the targets.
MaskedExample RandomMask(const TokenGrid& grid, SplitMix64& rng);

// Draws r ~ U(0,1) per sample, hides ceil(r*T) random positions, and takes
// one plain SGD step on the mean masked cross-entropy. Returns the loss
// before the update.
double TrainStep(ContextModel& model, std::span<const TokenGrid> batch,
                 double learning_rate, uint64_t seed);

struct ContextTrainOptions {
  int epochs = 10;
  int steps = 0;  // if > 0, overrides epochs
  int batch_size = 8;
  double learning_rate = 0.05;  // halved after each quarter of training
  uint64_t seed = 0;
  std::function<void(int step, int total_steps, double loss)> on_step;  // step is 1-based
};

struct ContextTrainReport {
  int steps = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
};

// Runs TrainStep over shuffled mini-batches, then rounds the parameters to
// float precision.
ContextTrainReport TrainContextModel(ContextModel& model, std::span<const TokenGrid> corpus,
                                     const ContextTrainOptions& options);

// Average code length in bits per token (all M heads) of `examples`' targets.
double CrossEntropyBitsPerToken(const ContextModel& model,
                                std::span<const MaskedExample> examples);
double MarginalBitsPerToken(const MarginalModel& model, std::span<const MaskedExample> examples);

// "PQM1M" file: version u8, M u8, V_s u16, e u16, hdim u16, K u8, K (dx, dy)
// i8 pairs, f32 parameters, CRC32 of everything before it, then the u64
// FNV-1a hash of the same bytes (the model id).
std::vector<uint8_t> SerializeContextModel(const ContextModel& model);
ContextModel ParseContextModel(std::span<const uint8_t> bytes);
void SaveContextModel(const std::filesystem::path& path, const ContextModel& model);
ContextModel LoadContextModel(const std::filesystem::path& path);
uint64_t ContextModelId(const ContextModel& model);

}  // namespace pqmim

#endif  // PQMIM_ENTROPY_MODEL_H_

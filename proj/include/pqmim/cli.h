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

#ifndef PQMIM_CLI_H_
#define PQMIM_CLI_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pqmim/codec.h"
#include "pqmim/error.h"
#include "pqmim/image.h"

namespace pqmim {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInvalid = 2;       // invalid-config, invalid-input
inline constexpr int kExitCorrupt = 3;       // corrupt-data, unsupported-version
inline constexpr int kExitModelMismatch = 4;
inline constexpr int kExitIo = 5;
inline constexpr int kExitInternal = 6;

int ExitCodeFor(ErrorCode code);

struct TrainConfig {
  int patch_size = 16;
  int num_subspaces = 2;
  int alphabet = 256;
  int latent_dim = 0;  // 0: 8 per sub-vector
  int kmeans_iters = 25;
  int epochs = 10;
  int steps = 0;  // > 0 overrides epochs
  int batch_size = 8;
  double learning_rate = 0.05;
  int embed_dim = 16;
  int hidden_dim = 128;
  // Start the symbol embeddings from the codebook geometry instead of noise.
  bool codebook_embeddings = true;
  uint64_t seed = 0;
};

// Basis, codebook, marginal and context model, trained in that order. With
// zero epochs and steps the context model is left at its uniform start.
CodecModels TrainModels(const std::vector<ImageBuffer>& images, const TrainConfig& config,
                        const std::function<void(const std::string&)>& log = {});

// Entry point shared by the pqmim binary and the tests. `args` excludes the
// program name. Logs go to `out`, diagnostics to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pqmim

#endif  // PQMIM_CLI_H_

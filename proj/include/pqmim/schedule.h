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

#ifndef PQMIM_SCHEDULE_H_
#define PQMIM_SCHEDULE_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pqmim {

// Wire values are fixed by the bitstream header.
enum class MaskingPolicy : uint8_t {
  kQuincunx = 0,
  kConfidenceLinear = 1,
  kConfidenceDoubling = 2,
  kRaster = 3,
};

std::string_view PolicyName(MaskingPolicy policy);
// Accepts the names returned by PolicyName. Throws kInvalidConfig.
MaskingPolicy ParsePolicy(std::string_view name);
bool IsConfidencePolicy(MaskingPolicy policy);

// Stage (1-based) of grid cell (x, y) under S-stage quincunx partitioning.
// Each pass peels off the odd coset of the current quincunx lattice and maps
// the even coset onto the next coarser lattice via (x, y) -> ((x+y)/2, (x-y)/2).
int QuincunxStage(int x, int y, int num_stages);

// Ordered partition of the w*h raster positions into coding stages.
struct StageSchedule {
  MaskingPolicy policy = MaskingPolicy::kQuincunx;
  int num_stages = 0;
  int grid_w = 0;
  int grid_h = 0;
  // Number of positions coded in each stage; sums to w*h.
  std::vector<int> cardinalities;
  // Explicit raster-ordered position sets. For quincunx and raster every
  // stage is listed; for the confidence policies only stage 1 is (the rest
  // is chosen at coding time from model confidences).
  std::vector<std::vector<int>> stages;

  int size() const { return grid_w * grid_h; }
  bool is_static() const { return !IsConfidencePolicy(policy); }
};

// Throws kInvalidConfig on an infeasible stage count. For the raster policy
// `num_stages` is ignored and one stage per position is produced.
StageSchedule BuildSchedule(int grid_w, int grid_h, int num_stages, MaskingPolicy policy);

// Confidence of one position: the largest geometric mean over the M heads
// of the probability given to the same symbol, as a 16.16 fixed point value.
// `probabilities` holds M rows of `alphabet` entries.
uint32_t QuantizedConfidence(std::span<const double> probabilities, int num_heads,
                             int alphabet);

// Picks the `count` most confident of `remaining` (ties to the lower raster
// index) and returns them in raster order. `probabilities` holds one
// M x alphabet block per entry of `remaining`, in the same order.
std::vector<int> ConfidenceSelect(std::span<const double> probabilities, int num_heads,
                                  int alphabet, std::span<const int> remaining, int count);

}  // namespace pqmim

#endif  // PQMIM_SCHEDULE_H_

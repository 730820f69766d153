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

#include "pqmim/schedule.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pqmim/error.h"

namespace pqmim {

std::string_view PolicyName(MaskingPolicy policy) {
  switch (policy) {
    case MaskingPolicy::kQuincunx:
      return "quincunx";
    case MaskingPolicy::kConfidenceLinear:
      return "confidence_linear";
    case MaskingPolicy::kConfidenceDoubling:
      return "confidence_doubling";
    case MaskingPolicy::kRaster:
      return "raster";
  }
  return "unknown";
}

MaskingPolicy ParsePolicy(std::string_view name) {
  for (auto p : {MaskingPolicy::kQuincunx, MaskingPolicy::kConfidenceLinear,
                 MaskingPolicy::kConfidenceDoubling, MaskingPolicy::kRaster}) {
    if (PolicyName(p) == name) return p;
  }
  Fail(ErrorCode::kInvalidConfig, "unknown masking policy: " + std::string(name));
}

bool IsConfidencePolicy(MaskingPolicy policy) {
  return policy == MaskingPolicy::kConfidenceLinear ||
         policy == MaskingPolicy::kConfidenceDoubling;
}

int QuincunxStage(int x, int y, int num_stages) {
  for (int s = num_stages; s >= 2; --s) {
    if (((x + y) & 1) != 0) return s;
    const int sum = x + y;
    const int diff = x - y;
    x = sum / 2;
    y = diff / 2;
  }
  return 1;
}

namespace {

int CeilLog2(int n) {
  int bits = 0;
  while ((1LL << bits) < n) ++bits;
  return bits;
}

}  // namespace

StageSchedule BuildSchedule(int grid_w, int grid_h, int num_stages, MaskingPolicy policy) {
  Require(grid_w >= 1 && grid_h >= 1, ErrorCode::kInvalidConfig, "empty token grid");
  const int total = grid_w * grid_h;
  StageSchedule schedule;
  schedule.policy = policy;
  schedule.grid_w = grid_w;
  schedule.grid_h = grid_h;

  if (policy == MaskingPolicy::kRaster) {
    schedule.num_stages = total;
    schedule.cardinalities.assign(total, 1);
    schedule.stages.resize(total);
    for (int t = 0; t < total; ++t) schedule.stages[t] = {t};
    return schedule;
  }

  Require(num_stages >= 1 && num_stages <= 255, ErrorCode::kInvalidConfig,
          "stage count must be in [1, 255]");
  schedule.num_stages = num_stages;

  if (policy == MaskingPolicy::kQuincunx) {
    schedule.stages.resize(num_stages);
    for (int y = 0; y < grid_h; ++y) {
      for (int x = 0; x < grid_w; ++x) {
        schedule.stages[QuincunxStage(x, y, num_stages) - 1].push_back(y * grid_w + x);
      }
    }
    for (const auto& s : schedule.stages) {
      schedule.cardinalities.push_back(static_cast<int>(s.size()));
    }
    return schedule;
  }

  schedule.cardinalities.assign(num_stages, 0);
  if (policy == MaskingPolicy::kConfidenceDoubling) {
    Require(num_stages <= 1 + CeilLog2(total), ErrorCode::kInvalidConfig,
            "too many stages for a doubling schedule on this grid");
    for (int s = 2; s <= num_stages; ++s) {
      schedule.cardinalities[s - 1] = total >> (num_stages - s + 1);
    }
  } else {
    Require(num_stages <= total, ErrorCode::kInvalidConfig,
            "more linear stages than grid positions");
    for (int s = 2; s <= num_stages; ++s) schedule.cardinalities[s - 1] = total / num_stages;
  }
  const int rest = std::accumulate(schedule.cardinalities.begin() + 1,
                                   schedule.cardinalities.end(), 0);
  schedule.cardinalities[0] = total - rest;

  // No model output exists before stage 1, so its positions are spread
  // evenly over the raster order.
  const int first = schedule.cardinalities[0];
  std::vector<int> seed(first);
  for (int k = 0; k < first; ++k) {
    seed[k] = static_cast<int>(static_cast<int64_t>(k) * total / first);
  }
  schedule.stages.push_back(std::move(seed));
  return schedule;
}

uint32_t QuantizedConfidence(std::span<const double> probabilities, int num_heads,
                             int alphabet) {
  Require(probabilities.size() == static_cast<size_t>(num_heads) * alphabet,
          ErrorCode::kInvalidInput, "probability block has the wrong size");
  double best = 0.0;
  for (int v = 0; v < alphabet; ++v) {
    double log_sum = 0.0;
    for (int m = 0; m < num_heads; ++m) {
      log_sum += std::log(std::max(probabilities[static_cast<size_t>(m) * alphabet + v], 1e-300));
    }
    best = std::max(best, std::exp(log_sum / num_heads));
  }
  const double scaled = std::floor(std::clamp(best, 0.0, 1.0) * 65536.0);
  return static_cast<uint32_t>(scaled);
}

std::vector<int> ConfidenceSelect(std::span<const double> probabilities, int num_heads,
                                  int alphabet, std::span<const int> remaining, int count) {
  Require(count >= 0 && static_cast<size_t>(count) <= remaining.size(),
          ErrorCode::kInvalidInput, "cannot select more positions than remain");
  const size_t block = static_cast<size_t>(num_heads) * alphabet;
  Require(probabilities.size() == block * remaining.size(), ErrorCode::kInvalidInput,
          "probabilities do not match the remaining positions");
  struct Candidate {
    uint32_t confidence;
    int position;
  };
  std::vector<Candidate> candidates(remaining.size());
  for (size_t i = 0; i < remaining.size(); ++i) {
    candidates[i] = {QuantizedConfidence(probabilities.subspan(i * block, block), num_heads,
                                         alphabet),
                     remaining[i]};
  }
  std::partial_sort(candidates.begin(), candidates.begin() + count, candidates.end(),
                    [](const Candidate& a, const Candidate& b) {
                      if (a.confidence != b.confidence) return a.confidence > b.confidence;
                      return a.position < b.position;
                    });
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i) out[i] = candidates[i].position;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pqmim

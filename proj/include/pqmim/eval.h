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

#ifndef PQMIM_EVAL_H_
#define PQMIM_EVAL_H_

#include <filesystem>
#include <string>
#include <vector>

#include "pqmim/codec.h"
#include "pqmim/image.h"
#include "pqmim/schedule.h"

namespace pqmim {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(255^2 / MSE) over all samples, capped at kPsnrCap. Throws
// kInvalidInput on a size mismatch.
double Psnr(const ImageBuffer& a, const ImageBuffer& b);

// Multi-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, five scales with weights {0.0448, 0.2856, 0.3001, 0.2363,
// 0.1333}. Images too small for five scales use fewer, with the weights
// renormalized. Computed per channel and averaged.
double MsSsim(const ImageBuffer& a, const ImageBuffer& b);

// Single-channel variant on a row-major plane of doubles.
double MsSsimPlane(const std::vector<double>& a, const std::vector<double>& b, int width,
                   int height);

struct NamedImage {
  std::string name;
  ImageBuffer image;
};

// Loads every image of ListImages(dir). Throws kInvalidInput when empty.
std::vector<NamedImage> LoadCorpus(const std::filesystem::path& dir);

struct RdConfig {
  std::string id;
  CodecConfig codec;
};

struct RdRow {
  std::string config_id;
  std::string image;  // "mean" for per-config summary rows
  int width = 0;
  int height = 0;
  int f = 0;
  int m = 0;
  int vs = 0;
  int s = 0;
  MaskingPolicy policy = MaskingPolicy::kQuincunx;
  double bpp = 0.0;
  double psnr_db = 0.0;
  double ms_ssim = 0.0;
  double enc_ms = 0.0;
  double dec_ms = 0.0;
};

struct RdReport {
  std::vector<RdRow> rows;       // config-major, corpus order
  std::vector<RdRow> summaries;  // one per config
};

struct RdSweepOptions {
  int jobs = 0;               // 0: hardware concurrency
  bool record_timing = true;  // false writes zero timings (reproducible CSVs)
  std::filesystem::path stream_dir;  // if set, bitstreams are written here
};

// Encodes, decodes and scores every image under every config. The bpp of
// each row is measured on the serialized stream that is also decoded.
RdReport RdSweep(const std::vector<NamedImage>& corpus, const std::vector<RdConfig>& configs,
                 const RdSweepOptions& options = {});

// Columns: config_id,image,W,H,f,M,V_s,S,policy,bpp,psnr_db,ms_ssim,enc_ms,dec_ms.
// Image rows first, then the summary rows.
std::string RdCsv(const RdReport& report);
// (bpp, metric) pairs per config: config_id,bpp,psnr_db,ms_ssim.
std::string RdPlotCsv(const RdReport& report);
void WriteRdCsv(const std::filesystem::path& path, const RdReport& report);
void WriteRdPlotCsv(const std::filesystem::path& path, const RdReport& report);

struct PolicyCell {
  MaskingPolicy policy = MaskingPolicy::kQuincunx;
  int num_stages = 5;
};

struct PolicyRow {
  std::string label;  // policy name, or "marginal" for quincunx S = 1
  MaskingPolicy policy = MaskingPolicy::kQuincunx;
  int num_stages = 0;
  double bpp = 0.0;            // mean over the corpus
  double predict_calls = 0.0;  // mean per image
};

// Mean bpp and predict-call count per (policy, S) cell, sharing one set of
// trained models. Images are quantized once.
std::vector<PolicyRow> PolicyReport(const std::vector<NamedImage>& corpus,
                                    std::shared_ptr<const CodecModels> models,
                                    const std::vector<PolicyCell>& cells);
std::string PolicyCsv(const std::vector<PolicyRow>& rows);

}  // namespace pqmim

#endif  // PQMIM_EVAL_H_

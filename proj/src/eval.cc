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

#include "pqmim/eval.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "pqmim/binary_io.h"
#include "pqmim/error.h"

namespace pqmim {

double Psnr(const ImageBuffer& a, const ImageBuffer& b) {
  Require(a.width() == b.width() && a.height() == b.height() && !a.empty(),
          ErrorCode::kInvalidInput, "psnr needs two images of the same size");
  auto sa = a.samples();
  auto sb = b.samples();
  double sse = 0.0;
  for (size_t i = 0; i < sa.size(); ++i) {
    const double d = static_cast<double>(sa[i]) - static_cast<double>(sb[i]);
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(sa.size());
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

namespace {

constexpr std::array<double, 5> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> GaussianKernel(int size, double sigma) {
  std::vector<double> k(size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" filtering.
std::vector<double> Filter(const std::vector<double>& in, int w, int h,
                           const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * in[static_cast<size_t>(y) * w + x + i];
      tmp[static_cast<size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

// Mean SSIM and mean contrast-structure term at one scale.
std::pair<double, double> SsimAtScale(const std::vector<double>& a,
                                      const std::vector<double>& b, int w, int h) {
  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
  // Planes smaller than the window shrink it.
  const int size = std::min({kWindow, w, h});
  const auto kernel = GaussianKernel(size, kSigma * size / kWindow);
  const size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = Filter(a, w, h, kernel);
  const auto mu_b = Filter(b, w, h, kernel);
  const auto e_aa = Filter(aa, w, h, kernel);
  const auto e_bb = Filter(bb, w, h, kernel);
  const auto e_ab = Filter(ab, w, h, kernel);
  double ssim = 0.0;
  double cs = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double c = (2.0 * cov + kC2) / (var_a + var_b + kC2);
    const double l = (2.0 * mu_a[i] * mu_b[i] + kC1) /
                     (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1);
    ssim += l * c;
    cs += c;
  }
  const double count = static_cast<double>(mu_a.size());
  return {ssim / count, cs / count};
}

std::vector<double> Downsample(const std::vector<double>& in, int w, int h) {
  const int ow = w / 2;
  const int oh = h / 2;
  std::vector<double> out(static_cast<size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const size_t i = static_cast<size_t>(2 * y) * w + 2 * x;
      out[static_cast<size_t>(y) * ow + x] = 0.25 * (in[i] + in[i + 1] + in[i + w] + in[i + w + 1]);
    }
  }
  return out;
}

}  // namespace

double MsSsimPlane(const std::vector<double>& a, const std::vector<double>& b, int width,
                   int height) {
  Require(width >= 1 && height >= 1 && a.size() == static_cast<size_t>(width) * height &&
              b.size() == a.size(),
          ErrorCode::kInvalidInput, "ms-ssim needs two planes of the same size");
  int scales = 1;
  while (scales < static_cast<int>(kScaleWeights.size()) &&
         std::min(width, height) / (1 << scales) >= kWindow) {
    ++scales;
  }
  // The standard weights are used as-is at full depth and renormalized when
  // the image is too small for all five scales.
  double weight_sum = 0.0;
  for (int i = 0; i < scales; ++i) weight_sum += kScaleWeights[i];
  if (scales == static_cast<int>(kScaleWeights.size())) weight_sum = 1.0;

  std::vector<double> pa = a;
  std::vector<double> pb = b;
  int w = width;
  int h = height;
  double score = 1.0;
  for (int i = 0; i < scales; ++i) {
    const auto [ssim, cs] = SsimAtScale(pa, pb, w, h);
    const double weight = kScaleWeights[i] / weight_sum;
    const double term = i + 1 == scales ? ssim : cs;
    score *= std::pow(std::max(term, 0.0), weight);
    if (i + 1 < scales) {
      pa = Downsample(pa, w, h);
      pb = Downsample(pb, w, h);
      w /= 2;
      h /= 2;
    }
  }
  return std::clamp(score, 0.0, 1.0);
}

double MsSsim(const ImageBuffer& a, const ImageBuffer& b) {
  Require(a.width() == b.width() && a.height() == b.height() && !a.empty(),
          ErrorCode::kInvalidInput, "ms-ssim needs two images of the same size");
  const int w = a.width();
  const int h = a.height();
  const size_t n = static_cast<size_t>(w) * h;
  double total = 0.0;
  for (int c = 0; c < ImageBuffer::kChannels; ++c) {
    std::vector<double> pa(n), pb(n);
    for (size_t i = 0; i < n; ++i) {
      pa[i] = a.samples()[i * ImageBuffer::kChannels + c];
      pb[i] = b.samples()[i * ImageBuffer::kChannels + c];
    }
    total += MsSsimPlane(pa, pb, w, h);
  }
  return total / ImageBuffer::kChannels;
}

std::vector<NamedImage> LoadCorpus(const std::filesystem::path& dir) {
  std::vector<NamedImage> corpus;
  for (const auto& path : ListImages(dir)) {
    corpus.push_back({path.filename().string(), ReadImage(path)});
  }
  Require(!corpus.empty(), ErrorCode::kInvalidInput, "no images in " + dir.string());
  return corpus;
}

namespace {

// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first
// exception (lowest index) is rethrown.
template <typename Fn>
void ParallelFor(int count, int jobs, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, count);
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) run(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
        for (int i = next++; i < count; i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double MsSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string Format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

RdReport RdSweep(const std::vector<NamedImage>& corpus, const std::vector<RdConfig>& configs,
                 const RdSweepOptions& options) {
  for (const auto& c : configs) {
    Require(c.codec.models != nullptr, ErrorCode::kInvalidConfig,
            "config " + c.id + " has no trained models");
  }
  if (!options.stream_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.stream_dir, ec);
    if (ec) Fail(ErrorCode::kIo, "cannot create " + options.stream_dir.string());
  }
  const int n_img = static_cast<int>(corpus.size());
  const int n_cfg = static_cast<int>(configs.size());
  RdReport report;
  report.rows.resize(static_cast<size_t>(n_img) * n_cfg);

  ParallelFor(n_img * n_cfg, options.jobs, [&](int k) {
    const RdConfig& cfg = configs[k / n_img];
    const NamedImage& img = corpus[k % n_img];
    RdRow& row = report.rows[k];
    row.config_id = cfg.id;
    row.image = img.name;
    row.width = img.image.width();
    row.height = img.image.height();
    row.f = cfg.codec.patch_size();
    row.m = cfg.codec.num_subspaces();
    row.vs = cfg.codec.alphabet();
    row.s = cfg.codec.num_stages;
    row.policy = cfg.codec.policy;

    auto t0 = std::chrono::steady_clock::now();
    const std::vector<uint8_t> stream = SerializeBitstream(EncodeImage(img.image, cfg.codec));
    const double enc_ms = MsSince(t0);
    if (!options.stream_dir.empty()) {
      WriteFileBytes(options.stream_dir / (cfg.id + "_" + img.name + ".pqmb"), stream);
    }
    t0 = std::chrono::steady_clock::now();
    const ImageBuffer recon = DecodeImage(ParseBitstream(stream), cfg.codec);
    const double dec_ms = MsSince(t0);

    row.bpp = MeasureRate(stream.size(), row.width, row.height);
    row.psnr_db = Psnr(img.image, recon);
    row.ms_ssim = MsSsim(img.image, recon);
    row.enc_ms = options.record_timing ? enc_ms : 0.0;
    row.dec_ms = options.record_timing ? dec_ms : 0.0;
  });

  for (int c = 0; c < n_cfg; ++c) {
    RdRow mean = report.rows[static_cast<size_t>(c) * n_img];
    mean.image = "mean";
    mean.width = mean.height = 0;
    mean.bpp = mean.psnr_db = mean.ms_ssim = mean.enc_ms = mean.dec_ms = 0.0;
    for (int i = 0; i < n_img; ++i) {
      const RdRow& r = report.rows[static_cast<size_t>(c) * n_img + i];
      mean.bpp += r.bpp / n_img;
      mean.psnr_db += r.psnr_db / n_img;
      mean.ms_ssim += r.ms_ssim / n_img;
      mean.enc_ms += r.enc_ms / n_img;
      mean.dec_ms += r.dec_ms / n_img;
    }
    report.summaries.push_back(mean);
  }
  return report;
}

namespace {

std::string CsvLine(const RdRow& r) {
  std::string line = r.config_id + "," + r.image + "," + std::to_string(r.width) + "," +
                     std::to_string(r.height) + "," + std::to_string(r.f) + "," +
                     std::to_string(r.m) + "," + std::to_string(r.vs) + "," +
                     std::to_string(r.s) + "," + std::string(PolicyName(r.policy)) + ",";
  line += Format("%.6f", r.bpp) + "," + Format("%.4f", r.psnr_db) + "," +
          Format("%.6f", r.ms_ssim) + "," + Format("%.3f", r.enc_ms) + "," +
          Format("%.3f", r.dec_ms) + "\n";
  return line;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()),
                                                text.size()));
}

}  // namespace

std::string RdCsv(const RdReport& report) {
  std::string out = "config_id,image,W,H,f,M,V_s,S,policy,bpp,psnr_db,ms_ssim,enc_ms,dec_ms\n";
  for (const auto& r : report.rows) out += CsvLine(r);
  for (const auto& r : report.summaries) out += CsvLine(r);
  return out;
}

std::string RdPlotCsv(const RdReport& report) {
  std::string out = "config_id,bpp,psnr_db,ms_ssim\n";
  for (const auto& r : report.rows) {
    out += r.config_id + "," + Format("%.6f", r.bpp) + "," + Format("%.4f", r.psnr_db) + "," +
           Format("%.6f", r.ms_ssim) + "\n";
  }
  return out;
}

void WriteRdCsv(const std::filesystem::path& path, const RdReport& report) {
  WriteText(path, RdCsv(report));
}

void WriteRdPlotCsv(const std::filesystem::path& path, const RdReport& report) {
  WriteText(path, RdPlotCsv(report));
}

std::vector<PolicyRow> PolicyReport(const std::vector<NamedImage>& corpus,
                                    std::shared_ptr<const CodecModels> models,
                                    const std::vector<PolicyCell>& cells) {
  Require(models != nullptr, ErrorCode::kInvalidConfig, "policy report needs trained models");
  Require(!corpus.empty(), ErrorCode::kInvalidInput, "policy report needs images");
  std::vector<TokenGrid> tokens;
  for (const auto& img : corpus) tokens.push_back(Quantize(Forward(img.image, models->basis), models->codebook));

  std::vector<PolicyRow> rows;
  for (const auto& cell : cells) {
    CodecConfig config{models, cell.num_stages, cell.policy};
    PolicyRow row;
    row.policy = cell.policy;
    row.num_stages = cell.num_stages;
    row.label = cell.policy == MaskingPolicy::kQuincunx && cell.num_stages == 1
                    ? "marginal"
                    : std::string(PolicyName(cell.policy));
    for (size_t i = 0; i < corpus.size(); ++i) {
      CodingStats stats;
      const Bitstream bits = EncodeTokens(tokens[i], corpus[i].image.width(),
                                          corpus[i].image.height(), config, &stats);
      row.bpp += MeasureRate(bits) / static_cast<double>(corpus.size());
      row.predict_calls += static_cast<double>(stats.predict_calls) / corpus.size();
    }
    rows.push_back(row);
  }
  return rows;
}

std::string PolicyCsv(const std::vector<PolicyRow>& rows) {
  std::string out = "policy,S,bpp,predict_calls\n";
  for (const auto& r : rows) {
    out += r.label + "," + std::to_string(r.num_stages) + "," + Format("%.6f", r.bpp) + "," +
           Format("%.2f", r.predict_calls) + "\n";
  }
  return out;
}

}  // namespace pqmim

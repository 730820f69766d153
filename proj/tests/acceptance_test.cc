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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pqmim/binary_io.h"
#include "pqmim/cli.h"
#include "pqmim/codec.h"
#include "pqmim/entropy_model.h"
#include "pqmim/eval.h"
#include "pqmim/image.h"
#include "pqmim/quantizer.h"
#include "pqmim/random.h"
#include "pqmim/range_coder.h"
#include "pqmim/schedule.h"
#include "pqmim/transform.h"

namespace pqmim {
namespace {

// Tolerances and budgets.
constexpr double kLosslessSeconds = 120;
constexpr double kCoderSeconds = 30;
constexpr double kScheduleSeconds = 5;
constexpr double kBenefitSeconds = 20 * 60;
constexpr double kBenefitRatio = 0.95;
constexpr double kMonotoneBand = 0.005;
constexpr double kRateTolerance = 1e-4;
constexpr double kGradientTolerance = 1e-4;
constexpr double kInpaintAccuracy = 0.99;
constexpr double kMetricTolerance = 1e-9;

constexpr int kCropSide = 128;

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Format(const char* fmt, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;
std::vector<int> g_only;  // criteria named on the command line; empty runs all

void Report(int id, const std::function<Outcome()>& check) {
  if (!g_only.empty() && std::find(g_only.begin(), g_only.end(), id) == g_only.end()) return;
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++g_failures;
  std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
}

ImageBuffer NoiseImage(int w, int h, SplitMix64& rng) {
  ImageBuffer img(w, h);
  for (auto& v : img.samples()) v = static_cast<uint8_t>(rng.Below(256));
  return img;
}

std::vector<std::filesystem::path> NaturalFiles(const std::string& prefix) {
  std::vector<std::filesystem::path> out;
  for (const auto& p : ListImages(PQMIM_TEST_DATA "/natural")) {
    if (p.filename().string().rfind(prefix, 0) == 0) out.push_back(p);
  }
  return out;
}

std::vector<ImageBuffer> Crops(const std::string& prefix, int stride) {
  std::vector<ImageBuffer> out;
  for (const auto& p : NaturalFiles(prefix)) {
    const ImageBuffer im = ReadImage(p);
    for (int y = 0; y + kCropSide <= im.height(); y += stride)
      for (int x = 0; x + kCropSide <= im.width(); x += stride)
        out.push_back(im.Crop(x, y, kCropSide, kCropSide));
  }
  return out;
}

// Models trained once for criteria 1, 4, 5 and 9.
struct Trained {
  std::shared_ptr<const CodecModels> models;
  std::vector<ImageBuffer> train;
  std::vector<ImageBuffer> heldout;
  double train_seconds = 0;
};

Trained& Desk() {
  static Trained t = [] {
    Trained out;
    out.train = Crops("train_", 96);
    out.heldout = Crops("heldout_", kCropSide);
    TrainConfig tc;
    tc.patch_size = 8;
    tc.steps = 2000;
    tc.learning_rate = 1.0;
    const auto t0 = Clock::now();
    out.models = std::make_shared<CodecModels>(TrainModels(out.train, tc));
    out.train_seconds = Seconds(t0);
    return out;
  }();
  return t;
}

std::vector<PolicyRow>& HeldoutReport() {
  static std::vector<PolicyRow> rows = [] {
    std::vector<NamedImage> corpus;
    for (const auto& img : Desk().heldout) corpus.push_back({"crop", img});
    std::vector<PolicyCell> cells;
    for (int s = 1; s <= 5; ++s) cells.push_back({MaskingPolicy::kQuincunx, s});
    return PolicyReport(corpus, Desk().models, cells);
  }();
  return rows;
}

Outcome Lossless() {
  const auto models = Desk().models;
  SplitMix64 rng(2024);
  std::vector<ImageBuffer> images;
  for (int i = 0; i < 100; ++i) {
    images.push_back(NoiseImage(1 + static_cast<int>(rng.Below(80)),
                                1 + static_cast<int>(rng.Below(80)), rng));
  }
  int natural = 0;
  for (const auto& p : NaturalFiles("")) {
    const ImageBuffer im = ReadImage(p);
    for (int k = 0; k < 2; ++k) {
      const int w = 40 + static_cast<int>(rng.Below(60));
      const int h = 40 + static_cast<int>(rng.Below(60));
      images.push_back(im.Crop(static_cast<int>(rng.Below(im.width() - w)),
                               static_cast<int>(rng.Below(im.height() - h)), w, h));
      ++natural;
    }
  }
  const MaskingPolicy policies[] = {MaskingPolicy::kQuincunx, MaskingPolicy::kConfidenceLinear,
                                    MaskingPolicy::kConfidenceDoubling, MaskingPolicy::kRaster};
  const auto t0 = Clock::now();
  std::vector<std::vector<uint8_t>> first;
  int mismatches = 0;
  int streams = 0;
  for (int run = 0; run < 2; ++run) {
    size_t k = 0;
    for (const auto& img : images) {
      const TokenGrid tokens = Quantize(Forward(img, models->basis), models->codebook);
      for (MaskingPolicy p : policies) {
        const int grid_t = tokens.size();
        int s = p == MaskingPolicy::kRaster ? 0 : 5;
        if (p == MaskingPolicy::kConfidenceDoubling) {
          s = std::min(s, 1 + static_cast<int>(std::ceil(std::log2(std::max(grid_t, 1)))));
        } else if (p == MaskingPolicy::kConfidenceLinear) {
          s = std::min(s, grid_t);
        }
        const CodecConfig config{models, s, p};
        const auto bytes =
            SerializeBitstream(EncodeTokens(tokens, img.width(), img.height(), config));
        const TokenGrid decoded = DecodeTokens(ParseBitstream(bytes), config);
        if (!(decoded == tokens)) ++mismatches;
        const auto png = EncodePng(ReconstructImage(decoded, *models, img.width(), img.height()));
        if (run == 0) {
          first.push_back(png);
        } else if (first[k] != png) {
          ++mismatches;
        }
        ++k;
        ++streams;
      }
    }
  }
  const double secs = Seconds(t0);
  return {mismatches == 0 && natural >= 24 && secs < kLosslessSeconds,
          "100 random + " + std::to_string(natural) + " natural images, " +
              std::to_string(streams) + " streams, " + std::to_string(mismatches) +
              " mismatches, " + Format("%.1f s", secs)};
}

IntegerCdf RandomCdf(SplitMix64& rng) {
  const int v = 2 + static_cast<int>(rng.Below(rng.Below(4) == 0 ? 400 : 16));
  std::vector<double> p(v);
  const double skew = 1 + 8 * rng.NextDouble();
  for (auto& x : p) x = std::pow(rng.NextDouble(), skew);
  return QuantizeCdf(p);
}

Outcome CoderOptimality() {
  const auto t0 = Clock::now();
  SplitMix64 rng(99);
  std::string detail = "payload - ideal bits:";
  bool round_trip = true;
  bool within = true;
  const size_t sizes[] = {100000, 250000};
  for (size_t n : sizes) {
    std::vector<IntegerCdf> cdfs(n);
    std::vector<int> symbols(n);
    double ideal = 0;
    for (size_t i = 0; i < n; ++i) {
      cdfs[i] = RandomCdf(rng);
      const uint32_t u = static_cast<uint32_t>(rng.Below(kCdfTotal));
      symbols[i] = static_cast<int>(std::upper_bound(cdfs[i].begin(), cdfs[i].end(), u) -
                                    cdfs[i].begin()) - 1;
      ideal += IdealBits(cdfs[i], symbols[i]);
    }
    const CdfProvider provider = [&](size_t i) -> const IntegerCdf& { return cdfs[i]; };
    const auto bytes = EncodeSymbols(symbols, provider);
    round_trip = round_trip && DecodeSymbols(bytes, provider, n) == symbols;
    const double slack = 8.0 * bytes.size() - ideal;
    within = within && slack >= 0 && slack <= 64 + 0.01 * n;
    detail += Format(" N=%.0f %.1f (bound %.0f);", static_cast<double>(n), slack, 64 + 0.01 * n);
  }
  const double secs = Seconds(t0);
  return {round_trip && within && secs < kCoderSeconds,
          detail + Format(" %.1f s", secs)};
}

bool InLattice(int x, int y, int k) {
  const int step = 1 << (k / 2);
  if (x % step != 0 || y % step != 0) return false;
  return k % 2 == 0 || ((x / step) + (y / step)) % 2 == 0;
}

int OracleStage(int x, int y, int s_count) {
  if (InLattice(x, y, s_count - 1)) return 1;
  for (int s = 2; s <= s_count; ++s) {
    if (InLattice(x, y, s_count - s) && !InLattice(x, y, s_count - s + 1)) return s;
  }
  return -1;
}

Outcome QuincunxStructure() {
  const auto t0 = Clock::now();
  const bool c16 = BuildSchedule(16, 16, 5, MaskingPolicy::kQuincunx).cardinalities ==
                   std::vector<int>{16, 16, 32, 64, 128};
  const bool c4 = BuildSchedule(4, 4, 3, MaskingPolicy::kQuincunx).cardinalities ==
                  std::vector<int>{4, 4, 8};
  int bad = 0;
  int grids = 0;
  for (int s_count = 1; s_count <= 5; ++s_count) {
    for (int h = 1; h <= 48; ++h) {
      for (int w = 1; w <= 48; ++w) {
        ++grids;
        const StageSchedule sch = BuildSchedule(w, h, s_count, MaskingPolicy::kQuincunx);
        std::vector<int> seen(w * h, 0);
        bool ok = static_cast<int>(sch.stages.size()) == s_count;
        for (size_t s = 0; ok && s < sch.stages.size(); ++s) {
          for (int t : sch.stages[s]) {
            ++seen[t];
            ok = ok && OracleStage(t % w, t / w, s_count) == static_cast<int>(s) + 1;
          }
        }
        for (int c : seen) ok = ok && c == 1;
        bad += !ok;
      }
    }
  }
  const double secs = Seconds(t0);
  return {c16 && c4 && bad == 0 && secs < kScheduleSeconds,
          std::string("16x16 S=5 ") + (c16 ? "ok" : "wrong") + ", 4x4 S=3 " +
              (c4 ? "ok" : "wrong") + ", " + std::to_string(grids - bad) + "/" +
              std::to_string(grids) + " grids partition, " + Format("%.2f s", secs)};
}

Outcome ContextBenefit() {
  const Trained& d = Desk();
  const auto t0 = Clock::now();
  const auto& rows = HeldoutReport();
  const double secs = d.train_seconds + Seconds(t0);
  const double marginal = rows[0].bpp;
  const double quincunx = rows[4].bpp;
  const double ratio = quincunx / marginal;
  return {d.train.size() >= 200 && ratio <= kBenefitRatio && secs < kBenefitSeconds,
          std::to_string(d.train.size()) + " train / " + std::to_string(d.heldout.size()) +
              " held-out crops, 2000 steps; " +
              Format("marginal %.4f bpp, quincunx S=5 %.4f bpp, ratio %.3f", marginal,
                     quincunx, ratio) +
              Format(" (limit %.2f), %.0f s", kBenefitRatio, secs)};
}

Outcome StageMonotone() {
  const auto& rows = HeldoutReport();
  bool ok = true;
  std::string detail = "bpp S=1..5:";
  for (size_t i = 0; i < rows.size(); ++i) {
    detail += Format(" %.4f", rows[i].bpp);
    if (i > 0) ok = ok && rows[i].bpp <= rows[i - 1].bpp * (1 + kMonotoneBand);
  }
  return {ok, detail};
}

Outcome RateAccounting() {
  const double bpp = MeasureRate(246, 256, 256);
  Bitstream bits;
  bits.header.width = 256;
  bits.header.height = 256;
  bits.payload.resize(246 - kBitstreamHeaderBytes - kBitstreamTrailerBytes);
  const double framed = MeasureRate(bits);
  return {std::abs(bpp - 0.03) <= kRateTolerance && std::abs(framed - 0.03) <= kRateTolerance,
          Format("246 bytes at 256x256 -> %.6f bpp (framed stream %.6f)", bpp, framed)};
}

Outcome GradientCheck() {
  ContextModelShape shape;
  shape.num_heads = 2;
  shape.alphabet = 4;
  shape.embed_dim = 4;
  shape.hidden_dim = 8;
  double worst = 0;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    ContextModel model = ContextModel::Initialize(shape, seed, true);
    SplitMix64 rng(seed * 31);
    for (double& p : model.mutable_params()) p = 0.8 * (rng.NextDouble() - 0.5);
    // Examples point at their grids, which must outlive them.
    std::vector<TokenGrid> grids = {TokenGrid(4, 5, 2), TokenGrid(5, 4, 2)};
    std::vector<MaskedExample> ex;
    for (auto& g : grids) {
      for (auto& v : g.indices) v = static_cast<uint16_t>(rng.Below(4));
      ex.push_back(RandomMask(g, rng));
    }
    std::vector<double> grad;
    model.LossAndGradient(ex, &grad);
    const double h = 1e-5;
    for (size_t i = 0; i < model.num_params(); ++i) {
      const double saved = model.params()[i];
      model.mutable_params()[i] = saved + h;
      const double up = model.LossAndGradient(ex, nullptr);
      model.mutable_params()[i] = saved - h;
      const double down = model.LossAndGradient(ex, nullptr);
      model.mutable_params()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
      worst = std::max(worst, std::abs(numeric - grad[i]) / scale);
    }
  }
  return {worst < kGradientTolerance,
          Format("max relative error %.2e (limit %.0e)", worst, kGradientTolerance)};
}

Outcome KMeansScaling() {
  const auto& train = Desk().train;
  PatchMatrix patches = ExtractPatches(train[0], 8);
  for (size_t i = 1; i < train.size(); i += 2) patches.Append(ExtractPatches(train[i], 8));
  const TransformBasis basis = FitBasis(patches, 8, 16, 0);
  std::vector<LatentGrid> grids;
  for (size_t i = 0; i < train.size(); i += 2) grids.push_back(Forward(train[i], basis));
  const std::vector<double> vectors = StackLatents(grids);
  bool lloyd = true;
  std::vector<double> dist;
  for (int m : {1, 2, 4}) {
    PqTrainOptions o;
    o.num_subspaces = m;
    o.codebook_size = 256;
    o.tolerance = 0;
    const PqTrainResult r = TrainPq(vectors, 16, o);
    const auto& h = r.distortion_history;
    for (size_t i = 1; i < h.size(); ++i) lloyd = lloyd && h[i] <= h[i - 1] * (1 + 1e-12);
    dist.push_back(QuantizationDistortion(vectors, r.codebook));
  }
  return {lloyd && dist[2] <= dist[1] && dist[1] <= dist[0],
          std::to_string(vectors.size() / 16) + " vectors, Lloyd " +
              (lloyd ? "monotone" : "NOT monotone") +
              Format("; distortion M=1 %.2f, M=2 %.2f, M=4 %.2f", dist[0], dist[1], dist[2])};
}

Outcome InpaintSanity() {
  // Identity at drop rate 0 on held-out tokens.
  const auto& d = Desk();
  bool identity = true;
  for (const auto& img : d.heldout) {
    const TokenGrid tokens = Quantize(Forward(img, d.models->basis), d.models->codebook);
    const std::vector<uint8_t> none(tokens.size(), 0);
    identity = identity && Inpaint(tokens, none, d.models->context, InpaintMode::kArgmax) == tokens;
  }
  // Checkerboard of two random symbols: every token is fixed by its neighbors.
  ContextModelShape s;
  s.num_heads = 2;
  s.alphabet = 8;
  s.embed_dim = 8;
  s.hidden_dim = 32;
  SplitMix64 rng(5);
  auto board = [&] {
    TokenGrid g(12, 12, 2);
    const int a = static_cast<int>(rng.Below(8));
    const int b = (a + 1 + static_cast<int>(rng.Below(7))) % 8;
    for (int t = 0; t < g.size(); ++t) {
      const bool odd = (t % 12 + t / 12) % 2;
      g.at(t, 0) = static_cast<uint16_t>(odd ? a : b);
      g.at(t, 1) = static_cast<uint16_t>(odd ? b : a);
    }
    return g;
  };
  std::vector<TokenGrid> corpus;
  // Enough boards that every (a, b) pair is seen in training.
  for (int i = 0; i < 256; ++i) corpus.push_back(board());
  ContextModel model = ContextModel::Initialize(s, 2);
  ContextTrainOptions o;
  o.steps = 1500;
  o.learning_rate = 1.0;
  TrainContextModel(model, corpus, o);
  int filled = 0;
  int correct = 0;
  for (int i = 0; i < 50; ++i) {
    const TokenGrid truth = board();
    std::vector<uint8_t> missing(truth.size(), 0);
    for (auto& m : missing) m = rng.NextDouble() < 0.3;
    const TokenGrid out = Inpaint(truth, missing, model, InpaintMode::kArgmax);
    for (int t = 0; t < truth.size(); ++t) {
      if (!missing[t]) continue;
      ++filled;
      correct += out.at(t, 0) == truth.at(t, 0) && out.at(t, 1) == truth.at(t, 1);
    }
  }
  const double acc = static_cast<double>(correct) / filled;
  return {identity && acc >= kInpaintAccuracy,
          std::string("drop 0 identity ") + (identity ? "ok" : "BROKEN") +
              Format("; checkerboard 30%% drops: %.4f of %.0f filled tokens correct", acc,
                     filled)};
}

ImageBuffer Constant(int w, int h, int v) {
  ImageBuffer img(w, h);
  std::fill(img.samples().begin(), img.samples().end(), static_cast<uint8_t>(v));
  return img;
}

Outcome Metrics() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& name) {
    if (!ok) failed.push_back(name);
  };
  SplitMix64 rng(17);
  const ImageBuffer a = NoiseImage(40, 30, rng);
  expect(Psnr(a, a) == kPsnrCap, "psnr cap");
  const double off_by_one = Psnr(Constant(16, 16, 10), Constant(16, 16, 11));
  expect(std::abs(off_by_one - 10 * std::log10(255.0 * 255.0)) < kMetricTolerance &&
             std::abs(off_by_one - 48.13) < 0.005,
         "psnr 48.13");
  expect(std::abs(Psnr(Constant(8, 8, 0), Constant(8, 8, 255))) < kMetricTolerance,
         "psnr black/white");
  expect(std::abs(MsSsim(a, a) - 1) < kMetricTolerance, "ms-ssim identity");
  const double c1 = 6.5025;
  const double l = (2 * 100.0 * 140 + c1) / (100.0 * 100 + 140.0 * 140 + c1);
  expect(std::abs(MsSsim(Constant(180, 180, 100), Constant(180, 180, 140)) - std::pow(l, 0.1333)) <
             kMetricTolerance,
         "ms-ssim constants");
  const ImageBuffer cat = ReadImage(PQMIM_TEST_DATA "/natural/heldout_chelsea.png")
                              .Crop(0, 0, 256, 256);
  auto noisy = [&](double sigma) {
    ImageBuffer out = cat;
    for (auto& v : out.samples()) {
      const double n = sigma * std::sqrt(-2 * std::log(rng.NextDouble() + 1e-12)) *
                       std::cos(6.283185307179586 * rng.NextDouble());
      v = static_cast<uint8_t>(std::clamp(std::round(v + n), 0.0, 255.0));
    }
    return out;
  };
  const double mild = MsSsim(cat, noisy(1));
  const double strong = MsSsim(cat, noisy(10));
  expect(mild > strong && mild <= 1 && strong >= 0, "ms-ssim noise order");
  return {failed.empty(), failed.empty() ? Format("psnr(+1) %.4f dB; ms-ssim sigma 1 %.4f, sigma 10 %.4f",
                                                  off_by_one, mild, strong)
                                         : "failed: " + failed.front()};
}

}  // namespace
}  // namespace pqmim

int main(int argc, char** argv) {
  using namespace pqmim;
  for (int i = 1; i < argc; ++i) g_only.push_back(std::atoi(argv[i]));
  Report(1, Lossless);
  Report(2, CoderOptimality);
  Report(3, QuincunxStructure);
  Report(4, ContextBenefit);
  Report(5, StageMonotone);
  Report(6, RateAccounting);
  Report(7, GradientCheck);
  Report(8, KMeansScaling);
  Report(9, InpaintSanity);
  Report(10, Metrics);
  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}

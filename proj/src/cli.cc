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

#include "pqmim/cli.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "pqmim/binary_io.h"
#include "pqmim/entropy_model.h"
#include "pqmim/eval.h"
#include "pqmim/quantizer.h"
#include "pqmim/random.h"
#include "pqmim/schedule.h"
#include "pqmim/transform.h"

namespace pqmim {

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kInvalidConfig:
      return kExitInvalid;
    case ErrorCode::kCorruptData:
    case ErrorCode::kUnsupportedVersion:
      return kExitCorrupt;
    case ErrorCode::kModelMismatch:
      return kExitModelMismatch;
    case ErrorCode::kIo:
      return kExitIo;
  }
  return kExitInternal;
}

namespace {

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()),
                                                text.size()));
}

}  // namespace

CodecModels TrainModels(const std::vector<ImageBuffer>& images, const TrainConfig& config,
                        const std::function<void(const std::string&)>& log) {
  auto say = [&](const std::string& line) {
    if (log) log(line);
  };
  Require(!images.empty(), ErrorCode::kInvalidInput, "training corpus is empty");
  Require(config.patch_size >= 1 && config.patch_size <= 255, ErrorCode::kInvalidConfig,
          "f must be in [1, 255]");
  Require(config.num_subspaces >= 1 && config.num_subspaces <= 255, ErrorCode::kInvalidConfig,
          "M must be in [1, 255]");
  Require(config.alphabet >= 2 && config.alphabet <= (1 << 15) &&
              (config.alphabet & (config.alphabet - 1)) == 0,
          ErrorCode::kInvalidConfig, "V_s must be a power of two in [2, 32768]");
  const int dim = config.latent_dim > 0 ? config.latent_dim : 8 * config.num_subspaces;
  Require(dim % config.num_subspaces == 0, ErrorCode::kInvalidConfig,
          "latent dim must be a multiple of M");
  Require(config.epochs >= 0 && config.steps >= 0 && config.batch_size >= 1,
          ErrorCode::kInvalidConfig, "epochs, steps and batch size must be non-negative");

  CodecModels models;
  PatchMatrix patches;
  for (const auto& img : images) {
    if (patches.rows == 0) {
      patches = ExtractPatches(img, config.patch_size);
    } else {
      patches.Append(ExtractPatches(img, config.patch_size));
    }
  }
  models.basis = FitBasis(patches, config.patch_size, dim, config.seed);
  say("basis: " + std::to_string(patches.rows) + " patches, f=" +
      std::to_string(config.patch_size) + " d=" + std::to_string(dim) +
      (models.basis.rank_deficient ? " (rank deficient)" : ""));

  std::vector<LatentGrid> latents;
  for (const auto& img : images) latents.push_back(Forward(img, models.basis));
  const std::vector<double> stacked = StackLatents(latents);
  PqTrainOptions pq;
  pq.num_subspaces = config.num_subspaces;
  pq.codebook_size = config.alphabet;
  pq.iterations = config.kmeans_iters;
  pq.seed = config.seed;
  PqTrainResult trained = TrainPq(stacked, dim, pq);
  models.codebook = std::move(trained.codebook);
  for (size_t i = 0; i < trained.distortion_history.size(); ++i) {
    say("kmeans iter " + std::to_string(i + 1) + " distortion " +
        Fixed(trained.distortion_history[i], 6));
  }

  std::vector<TokenGrid> tokens;
  for (const auto& l : latents) tokens.push_back(Quantize(l, models.codebook));
  models.marginal = FitMarginal(tokens, config.num_subspaces, config.alphabet);
  say("marginal: " + std::to_string(tokens.size()) + " grids");

  ContextModelShape shape;
  shape.num_heads = config.num_subspaces;
  shape.alphabet = config.alphabet;
  shape.embed_dim = config.embed_dim;
  shape.hidden_dim = config.hidden_dim;
  models.context = ContextModel::Initialize(shape, config.seed);
  if (config.codebook_embeddings) SeedEmbeddingsFromCodebook(models.context, models.codebook);
  if (config.epochs > 0 || config.steps > 0) {
    ContextTrainOptions opts;
    opts.epochs = config.epochs;
    opts.steps = config.steps;
    opts.batch_size = config.batch_size;
    opts.learning_rate = config.learning_rate;
    opts.seed = config.seed;
    opts.on_step = [&](int step, int total, double loss) {
      if (step == 1 || step % 50 == 0 || step == total) {
        say("context step " + std::to_string(step) + "/" + std::to_string(total) + " loss " +
            Fixed(loss, 6));
      }
    };
    TrainContextModel(models.context, tokens, opts);
  } else {
    models.context.RoundToFloat();
    say("context: untrained");
  }
  models.Finalize();
  return models;
}

namespace {

class Logger {
 public:
  Logger(std::ostream& out, bool quiet) : out_(out), quiet_(quiet) {}
  void operator()(const std::string& line) {
    lines_ += line + "\n";
    if (!quiet_) out_ << line << "\n";
  }
  const std::string& text() const { return lines_; }

 private:
  std::ostream& out_;
  bool quiet_;
  std::string lines_;
};

struct BenchSection {
  std::string id;
  std::map<std::string, std::string> values;
};

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "[id]" headers followed by "key = value" lines; '#' and ';' start comments.
std::vector<BenchSection> ParseBenchConfig(const std::string& text) {
  std::vector<BenchSection> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = Trim(raw.substr(0, raw.find_first_of("#;")));
    if (line.empty()) continue;
    const std::string where = "bench config line " + std::to_string(line_no);
    if (line.front() == '[') {
      Require(line.back() == ']' && line.size() > 2, ErrorCode::kInvalidConfig,
              where + ": bad section header");
      sections.push_back({Trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    const auto eq = line.find('=');
    Require(eq != std::string::npos && !sections.empty(), ErrorCode::kInvalidConfig,
            where + ": expected key = value inside a section");
    sections.back().values[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  Require(!sections.empty(), ErrorCode::kInvalidConfig, "bench config has no sections");
  return sections;
}

int ParseInt(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(ErrorCode::kInvalidConfig, what + " is not an integer: " + s);
}

std::vector<RdConfig> LoadBenchConfigs(const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  const auto sections = ParseBenchConfig(std::string(bytes.begin(), bytes.end()));
  std::vector<RdConfig> configs;
  for (const auto& sec : sections) {
    RdConfig cfg;
    cfg.id = sec.id;
    for (const auto& [key, value] : sec.values) {
      if (key == "models") {
        std::filesystem::path dir = value;
        if (dir.is_relative()) dir = path.parent_path() / dir;
        try {
          cfg.codec.models = LoadModels(dir);
        } catch (const Error& e) {
          Fail(ErrorCode::kInvalidConfig,
               "config " + sec.id + ": cannot load models: " + e.what());
        }
      } else if (key == "policy") {
        cfg.codec.policy = ParsePolicy(value);
      } else if (key == "S") {
        cfg.codec.num_stages = ParseInt(value, "S");
      } else if (key != "f" && key != "M" && key != "V_s") {
        Fail(ErrorCode::kInvalidConfig, "config " + sec.id + ": unknown key " + key);
      }
    }
    Require(cfg.codec.models != nullptr, ErrorCode::kInvalidConfig,
            "config " + sec.id + " has no models entry");
    // Optional consistency checks against the trained artifacts.
    const std::pair<const char*, int> expected[] = {{"f", cfg.codec.patch_size()},
                                                   {"M", cfg.codec.num_subspaces()},
                                                   {"V_s", cfg.codec.alphabet()}};
    for (const auto& [key, actual] : expected) {
      auto it = sec.values.find(key);
      if (it != sec.values.end()) {
        Require(ParseInt(it->second, key) == actual, ErrorCode::kInvalidConfig,
                "config " + sec.id + ": " + key + " does not match its models");
      }
    }
    configs.push_back(std::move(cfg));
  }
  return configs;
}

bool LooksLikeBitstream(const std::vector<uint8_t>& bytes) {
  return bytes.size() >= 4 && bytes[0] == 'P' && bytes[1] == 'Q' && bytes[2] == 'M' &&
         bytes[3] == 'B';
}

std::string ManifestText(const CodecModels& m, const TrainConfig& c) {
  std::string s = "pqmim-manifest 1\n";
  s += "f " + std::to_string(m.basis.patch_size) + "\n";
  s += "M " + std::to_string(m.codebook.num_subspaces) + "\n";
  s += "V_s " + std::to_string(m.codebook.codebook_size) + "\n";
  s += "d " + std::to_string(m.basis.latent_dim) + "\n";
  s += "iters " + std::to_string(c.kmeans_iters) + "\n";
  s += "epochs " + std::to_string(c.epochs) + "\n";
  s += "steps " + std::to_string(c.steps) + "\n";
  s += "seed " + std::to_string(c.seed) + "\n";
  s += std::string(kBasisFile) + " " + Hex(m.basis_id) + "\n";
  s += std::string(kCodebookFile) + " " + Hex(m.codebook_id) + "\n";
  s += std::string(kMarginalFile) + " " + Hex(m.marginal_id) + "\n";
  s += std::string(kContextFile) + " " + Hex(m.context_id) + "\n";
  return s;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pqmim: product-quantized masked image codec"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress log lines");

  // train
  TrainConfig tc;
  std::string train_corpus, train_out;
  auto* train = app.add_subcommand("train", "train basis, codebook and entropy models");
  train->add_option("corpus_dir", train_corpus)->required();
  train->add_option("--f", tc.patch_size, "patch size");
  train->add_option("--M", tc.num_subspaces, "number of sub-vectors");
  train->add_option("--Vs", tc.alphabet, "centroids per sub-codebook");
  train->add_option("--dim", tc.latent_dim, "latent dimension (default 8*M)");
  train->add_option("--iters", tc.kmeans_iters, "k-means iterations");
  train->add_option("--epochs", tc.epochs, "context model epochs");
  train->add_option("--steps", tc.steps, "context model steps (overrides --epochs)");
  train->add_option("--batch", tc.batch_size, "mini-batch size");
  train->add_option("--lr", tc.learning_rate, "initial learning rate");
  train->add_option("--embed", tc.embed_dim, "embedding width");
  train->add_option("--hidden", tc.hidden_dim, "hidden layer width");
  train->add_option("--seed", tc.seed, "random seed");
  bool plain_init = false;
  train->add_flag("--plain_init", plain_init, "random symbol embeddings");
  train->add_option("--out_dir", train_out)->required();
  train->add_flag("--quiet", quiet);

  // encode
  std::string enc_image, enc_models, enc_policy = "quincunx", enc_out;
  int enc_stages = 5;
  auto* encode = app.add_subcommand("encode", "encode an image");
  encode->add_option("image", enc_image)->required();
  encode->add_option("--models", enc_models)->required();
  encode->add_option("--policy", enc_policy);
  encode->add_option("--S", enc_stages, "number of stages");
  encode->add_option("--out", enc_out)->required();
  encode->add_flag("--quiet", quiet);

  // decode
  std::string dec_stream, dec_models, dec_out, dec_ref;
  auto* decode = app.add_subcommand("decode", "decode a bitstream");
  decode->add_option("bitstream", dec_stream)->required();
  decode->add_option("--models", dec_models)->required();
  decode->add_option("--out", dec_out)->required();
  decode->add_option("--ref", dec_ref, "reference image for PSNR");
  decode->add_flag("--quiet", quiet);

  // bench
  std::string bench_corpus, bench_configs, bench_csv, bench_plot, bench_streams;
  int bench_jobs = 0;
  bool bench_no_timing = false;
  auto* bench = app.add_subcommand("bench", "rate-distortion sweep");
  bench->add_option("corpus_dir", bench_corpus)->required();
  bench->add_option("--configs", bench_configs)->required();
  bench->add_option("--out_csv", bench_csv)->required();
  bench->add_option("--plot_csv", bench_plot);
  bench->add_option("--streams_dir", bench_streams);
  bench->add_option("--jobs", bench_jobs)->check(CLI::NonNegativeNumber);
  bench->add_flag("--no_timing", bench_no_timing, "write zero timings");
  bench->add_flag("--quiet", quiet);

  // inpaint
  std::string inp_input, inp_models, inp_mode = "argmax", inp_out;
  double inp_drop = 0.0;
  uint64_t inp_seed = 0;
  int inp_stages = 5;
  auto* inpaint = app.add_subcommand("inpaint", "drop tokens and fill them from the model");
  inpaint->add_option("input", inp_input, "bitstream or image")->required();
  inpaint->add_option("--models", inp_models)->required();
  inpaint->add_option("--drop_rate", inp_drop)->check(CLI::Range(0.0, 1.0));
  inpaint->add_option("--seed", inp_seed);
  inpaint->add_option("--mode", inp_mode)->check(CLI::IsMember({"argmax", "sample"}));
  inpaint->add_option("--S", inp_stages, "fill-in stages");
  inpaint->add_option("--out", inp_out)->required();
  inpaint->add_flag("--quiet", quiet);

  // inspect
  std::string ins_stream;
  auto* inspect = app.add_subcommand("inspect", "print a bitstream header");
  inspect->add_option("bitstream", ins_stream)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  Logger log(out, quiet);
  try {
    if (*train) {
      tc.codebook_embeddings = !plain_init;
      std::vector<ImageBuffer> images;
      for (const auto& path : ListImages(train_corpus)) images.push_back(ReadImage(path));
      Require(!images.empty(), ErrorCode::kInvalidInput, "no images in " + train_corpus);
      log("corpus: " + std::to_string(images.size()) + " images");
      const CodecModels models = TrainModels(images, tc, [&](const std::string& l) { log(l); });
      SaveModels(train_out, models);
      const std::filesystem::path dir = train_out;
      WriteText(dir / "manifest.txt", ManifestText(models, tc));
      WriteText(dir / "train.log", log.text());
      return kExitOk;
    }
    if (*encode) {
      CodecConfig config{LoadModels(enc_models), enc_stages, ParsePolicy(enc_policy)};
      const ImageBuffer image = ReadImage(enc_image);
      CodingStats stats;
      const Bitstream bits = EncodeImage(image, config, &stats);
      const std::vector<uint8_t> bytes = SerializeBitstream(bits);
      WriteFileBytes(enc_out, bytes);
      log("bytes " + std::to_string(bytes.size()));
      log("bpp " + Fixed(MeasureRate(bytes.size(), image.width(), image.height()), 6));
      log("predict_calls " + std::to_string(stats.predict_calls));
      return kExitOk;
    }
    if (*decode) {
      const Bitstream bits = ParseBitstream(ReadFileBytes(dec_stream));
      CodecConfig config{LoadModels(dec_models), bits.header.num_stages, bits.header.policy};
      CodingStats stats;
      const ImageBuffer image = DecodeImage(bits, config, &stats);
      WriteImage(dec_out, image);
      log("predict_calls " + std::to_string(stats.predict_calls));
      if (!dec_ref.empty()) log("psnr " + Fixed(Psnr(ReadImage(dec_ref), image), 4));
      return kExitOk;
    }
    if (*bench) {
      const auto corpus = LoadCorpus(bench_corpus);
      const auto configs = LoadBenchConfigs(bench_configs);
      RdSweepOptions opts;
      opts.jobs = bench_jobs;
      opts.record_timing = !bench_no_timing;
      opts.stream_dir = bench_streams;
      const RdReport report = RdSweep(corpus, configs, opts);
      WriteRdCsv(bench_csv, report);
      if (!bench_plot.empty()) WriteRdPlotCsv(bench_plot, report);
      for (const auto& s : report.summaries) {
        log(s.config_id + " bpp " + Fixed(s.bpp, 6) + " psnr " + Fixed(s.psnr_db, 4) +
            " ms_ssim " + Fixed(s.ms_ssim, 6));
      }
      return kExitOk;
    }
    if (*inpaint) {
      const auto models = LoadModels(inp_models);
      const std::vector<uint8_t> bytes = ReadFileBytes(inp_input);
      TokenGrid tokens;
      int width = 0;
      int height = 0;
      if (LooksLikeBitstream(bytes)) {
        const Bitstream bits = ParseBitstream(bytes);
        CodecConfig config{models, bits.header.num_stages, bits.header.policy};
        tokens = DecodeTokens(bits, config);
        width = static_cast<int>(bits.header.width);
        height = static_cast<int>(bits.header.height);
      } else {
        const ImageBuffer image = ReadImage(inp_input);
        tokens = Quantize(Forward(image, models->basis), models->codebook);
        width = image.width();
        height = image.height();
      }
      const int total = tokens.size();
      const int dropped = static_cast<int>(std::llround(inp_drop * total));
      std::vector<int> order(total);
      for (int t = 0; t < total; ++t) order[t] = t;
      SplitMix64 rng(inp_seed);
      rng.Shuffle(std::span<int>(order));
      std::vector<uint8_t> missing(total, 0);
      for (int i = 0; i < dropped; ++i) missing[order[i]] = 1;
      const InpaintMode mode = inp_mode == "sample" ? InpaintMode::kSample : InpaintMode::kArgmax;
      const TokenGrid filled = Inpaint(tokens, missing, models->context, mode, inp_seed, inp_stages);
      WriteImage(inp_out, ReconstructImage(filled, *models, width, height));
      int changed = 0;
      for (int t = 0; t < total; ++t) {
        for (int m = 0; m < tokens.num_subspaces; ++m) changed += filled.at(t, m) != tokens.at(t, m);
      }
      log("dropped " + std::to_string(dropped) + " of " + std::to_string(total) + " tokens");
      log("changed_subindices " + std::to_string(changed));
      return kExitOk;
    }
    if (*inspect) {
      const std::vector<uint8_t> bytes = ReadFileBytes(ins_stream);
      const BitstreamHeader h = ParseBitstreamHeader(bytes);
      std::string crc = "ok";
      try {
        ParseBitstream(bytes);
      } catch (const Error& e) {
        crc = std::string("bad (") + e.what() + ")";
      }
      out << "magic PQMB\n"
          << "version " << int{h.version} << "\n"
          << "flags " << int{h.flags} << "\n"
          << "width " << h.width << "\n"
          << "height " << h.height << "\n"
          << "f " << int{h.patch_size} << "\n"
          << "M " << int{h.num_subspaces} << "\n"
          << "V_s " << (1 << h.log2_alphabet) << "\n"
          << "S " << int{h.num_stages} << "\n"
          << "policy " << PolicyName(h.policy) << "\n"
          << "basis_id " << Hex(h.basis_id) << "\n"
          << "codebook_id " << Hex(h.codebook_id) << "\n"
          << "marginal_id " << Hex(h.marginal_id) << "\n"
          << "context_id " << Hex(h.context_id) << "\n"
          << "payload_len " << h.payload_len << "\n"
          << "total_bytes " << bytes.size() << "\n"
          << "bpp " << Fixed(MeasureRate(bytes.size(), h.width, h.height), 6) << "\n"
          << "integrity " << crc << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace pqmim

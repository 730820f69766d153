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

#include "pqmim/codec.h"

#include <algorithm>
#include <bit>
#include <string>

#include "pqmim/binary_io.h"
#include "pqmim/error.h"
#include "pqmim/random.h"
#include "pqmim/range_coder.h"

namespace pqmim {

std::vector<uint8_t> SerializeBitstream(const Bitstream& bits) {
  const BitstreamHeader& h = bits.header;
  Require(bits.payload.size() <= UINT32_MAX, ErrorCode::kInvalidConfig, "payload too large");
  ByteWriter w;
  w.PutTag("PQMB");
  w.PutU8(h.version);
  w.PutU8(h.flags);
  w.PutU32(h.width);
  w.PutU32(h.height);
  w.PutU8(h.patch_size);
  w.PutU8(h.num_subspaces);
  w.PutU8(h.log2_alphabet);
  w.PutU8(h.num_stages);
  w.PutU8(static_cast<uint8_t>(h.policy));
  w.PutU8(0);  // reserved
  w.PutU64(h.basis_id);
  w.PutU64(h.codebook_id);
  w.PutU64(h.marginal_id);
  w.PutU64(h.context_id);
  w.PutU32(static_cast<uint32_t>(bits.payload.size()));
  w.PutBytes(bits.payload);
  w.PutU32(Crc32(bits.payload));
  return w.Release();
}

namespace {

BitstreamHeader ReadHeader(ByteReader& r) {
  r.ExpectTag("PQMB", "bitstream");
  BitstreamHeader h;
  h.version = r.GetU8();
  if (h.version != kBitstreamVersion) {
    Fail(ErrorCode::kUnsupportedVersion, "bitstream version " + std::to_string(h.version));
  }
  h.flags = r.GetU8();
  h.width = r.GetU32();
  h.height = r.GetU32();
  h.patch_size = r.GetU8();
  h.num_subspaces = r.GetU8();
  h.log2_alphabet = r.GetU8();
  h.num_stages = r.GetU8();
  const uint8_t policy = r.GetU8();
  r.GetU8();  // reserved
  h.basis_id = r.GetU64();
  h.codebook_id = r.GetU64();
  h.marginal_id = r.GetU64();
  h.context_id = r.GetU64();
  h.payload_len = r.GetU32();

  if (policy > static_cast<uint8_t>(MaskingPolicy::kRaster)) {
    Fail(ErrorCode::kCorruptData, "unknown masking policy in header");
  }
  h.policy = static_cast<MaskingPolicy>(policy);
  if (h.width == 0 || h.height == 0 || h.width > (1u << 24) || h.height > (1u << 24) ||
      h.patch_size == 0 || h.num_subspaces == 0 || h.log2_alphabet == 0 ||
      h.log2_alphabet > 15) {
    Fail(ErrorCode::kCorruptData, "inconsistent bitstream header");
  }
  if ((h.policy == MaskingPolicy::kRaster) != (h.num_stages == 0)) {
    Fail(ErrorCode::kCorruptData, "stage count inconsistent with policy");
  }
  return h;
}

}  // namespace

BitstreamHeader ParseBitstreamHeader(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  return ReadHeader(r);
}

Bitstream ParseBitstream(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  Bitstream bits;
  bits.header = ReadHeader(r);
  auto payload = r.GetBytes(bits.header.payload_len);
  bits.payload.assign(payload.begin(), payload.end());
  const uint32_t crc = r.GetU32();
  if (r.remaining() != 0) Fail(ErrorCode::kCorruptData, "trailing bytes after bitstream");
  if (crc != Crc32(bits.payload)) Fail(ErrorCode::kCorruptData, "payload CRC mismatch");
  return bits;
}

void CodecModels::Finalize() {
  Require(basis.latent_dim == codebook.dim(), ErrorCode::kInvalidConfig,
          "basis latent dim does not match the codebook");
  Require(marginal.num_heads == codebook.num_subspaces &&
              marginal.alphabet == codebook.codebook_size,
          ErrorCode::kInvalidConfig, "marginal model does not match the codebook");
  Require(context.shape().num_heads == codebook.num_subspaces &&
              context.shape().alphabet == codebook.codebook_size,
          ErrorCode::kInvalidConfig, "context model does not match the codebook");
  basis_id = BasisId(basis);
  codebook_id = CodebookId(codebook);
  marginal_id = MarginalId(marginal);
  context_id = ContextModelId(context);
}

std::shared_ptr<const CodecModels> LoadModels(const std::filesystem::path& dir) {
  auto models = std::make_shared<CodecModels>();
  models->basis = LoadBasis(dir / kBasisFile);
  models->codebook = LoadCodebook(dir / kCodebookFile);
  models->marginal = LoadMarginal(dir / kMarginalFile);
  models->context = LoadContextModel(dir / kContextFile);
  models->Finalize();
  return models;
}

void SaveModels(const std::filesystem::path& dir, const CodecModels& models) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) Fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  SaveBasis(dir / kBasisFile, models.basis);
  SaveCodebook(dir / kCodebookFile, models.codebook);
  SaveMarginal(dir / kMarginalFile, models.marginal);
  SaveContextModel(dir / kContextFile, models.context);
}

namespace {

int Log2Alphabet(int alphabet) {
  Require(alphabet >= 2 && alphabet <= (1 << 15) && std::has_single_bit(static_cast<unsigned>(alphabet)),
          ErrorCode::kInvalidConfig, "codec requires V_s to be a power of two <= 2^15");
  return std::countr_zero(static_cast<unsigned>(alphabet));
}

void ValidateConfig(const CodecConfig& config) {
  Require(config.models != nullptr, ErrorCode::kInvalidConfig, "codec models not loaded");
  const CodecModels& m = *config.models;
  Require(m.basis.latent_dim == m.codebook.dim() &&
              m.marginal.num_heads == m.codebook.num_subspaces &&
              m.marginal.alphabet == m.codebook.codebook_size &&
              m.context.shape().num_heads == m.codebook.num_subspaces &&
              m.context.shape().alphabet == m.codebook.codebook_size,
          ErrorCode::kInvalidConfig, "codec artifacts disagree on d, M or V_s");
  Require(m.basis.patch_size <= 255 && m.codebook.num_subspaces <= 255,
          ErrorCode::kInvalidConfig, "f and M must fit in one byte");
  Log2Alphabet(m.codebook.codebook_size);
  if (config.policy != MaskingPolicy::kRaster) {
    Require(config.num_stages >= 1 && config.num_stages <= 255, ErrorCode::kInvalidConfig,
            "stage count must be in [1, 255]");
  }
}

// Walks the coding order shared by encoder and decoder. `code(cdf, t, m)`
// must leave grid.at(t, m) holding the true symbol when it returns.
template <typename CodeFn>
void WalkStages(TokenGrid& grid, const CodecModels& models, const StageSchedule& schedule,
                CodingStats& stats, CodeFn&& code) {
  const int m_count = grid.num_subspaces;
  const int alphabet = models.codebook.codebook_size;
  std::vector<uint8_t> observed(grid.size(), 0);

  int first_context_stage = 0;
  if (schedule.policy != MaskingPolicy::kRaster) {
    std::vector<IntegerCdf> marginal(m_count);
    for (int m = 0; m < m_count; ++m) marginal[m] = QuantizeCdf(models.marginal.Distribution(m));
    for (int t : schedule.stages[0]) {
      for (int m = 0; m < m_count; ++m) code(marginal[m], t, m);
    }
    for (int t : schedule.stages[0]) observed[t] = 1;
    first_context_stage = 1;
  }

  std::vector<int> remaining;
  for (int s = first_context_stage; s < schedule.num_stages; ++s) {
    std::vector<int> positions;
    if (schedule.is_static()) {
      positions = schedule.stages[s];
    } else {
      remaining.clear();
      for (int t = 0; t < grid.size(); ++t) {
        if (!observed[t]) remaining.push_back(t);
      }
      positions = remaining;
    }
    const Predictions preds = models.context.Predict(grid, observed, positions);
    ++stats.predict_calls;

    std::vector<int> row_of(grid.size(), -1);
    for (size_t i = 0; i < positions.size(); ++i) row_of[positions[i]] = static_cast<int>(i);
    if (!schedule.is_static()) {
      positions = ConfidenceSelect(preds.probabilities, m_count, alphabet, remaining,
                                   schedule.cardinalities[s]);
    }
    for (int t : positions) {
      for (int m = 0; m < m_count; ++m) code(QuantizeCdf(preds.head(row_of[t], m)), t, m);
    }
    for (int t : positions) observed[t] = 1;
  }
}

StageSchedule ScheduleFor(const TokenGrid& grid, const CodecConfig& config) {
  return BuildSchedule(grid.grid_w, grid.grid_h, config.num_stages, config.policy);
}

}  // namespace

Bitstream EncodeTokens(const TokenGrid& tokens, int width, int height,
                       const CodecConfig& config, CodingStats* stats) {
  ValidateConfig(config);
  const CodecModels& models = *config.models;
  const int f = models.basis.patch_size;
  Require(width >= 1 && height >= 1 && tokens.grid_w == GridExtent(width, f) &&
              tokens.grid_h == GridExtent(height, f),
          ErrorCode::kInvalidConfig, "token grid does not match the image size");
  Require(tokens.num_subspaces == models.codebook.num_subspaces, ErrorCode::kInvalidConfig,
          "token grid does not match the codebook");
  for (uint16_t j : tokens.indices) {
    Require(j < models.codebook.codebook_size, ErrorCode::kInvalidInput,
            "token index out of range");
  }

  const StageSchedule schedule = ScheduleFor(tokens, config);
  CodingStats local;
  TokenGrid grid = tokens;
  RangeEncoder encoder;
  WalkStages(grid, models, schedule, local, [&](const IntegerCdf& cdf, int t, int m) {
    const int symbol = grid.at(t, m);
    encoder.EncodeSymbol(cdf, symbol);
    local.ideal_bits += IdealBits(cdf, symbol);
    ++local.coded_symbols;
  });

  Bitstream bits;
  BitstreamHeader& h = bits.header;
  h.width = static_cast<uint32_t>(width);
  h.height = static_cast<uint32_t>(height);
  h.patch_size = static_cast<uint8_t>(f);
  h.num_subspaces = static_cast<uint8_t>(models.codebook.num_subspaces);
  h.log2_alphabet = static_cast<uint8_t>(Log2Alphabet(models.codebook.codebook_size));
  h.num_stages =
      config.policy == MaskingPolicy::kRaster ? 0 : static_cast<uint8_t>(config.num_stages);
  h.policy = config.policy;
  h.basis_id = models.basis_id;
  h.codebook_id = models.codebook_id;
  h.marginal_id = models.marginal_id;
  h.context_id = models.context_id;
  bits.payload = encoder.Finish();
  h.payload_len = static_cast<uint32_t>(bits.payload.size());
  if (stats != nullptr) *stats = local;
  return bits;
}

Bitstream EncodeImage(const ImageBuffer& image, const CodecConfig& config, CodingStats* stats) {
  ValidateConfig(config);
  const TokenGrid tokens = Quantize(Forward(image, config.models->basis), config.models->codebook);
  return EncodeTokens(tokens, image.width(), image.height(), config, stats);
}

TokenGrid DecodeTokens(const Bitstream& bits, const CodecConfig& config, CodingStats* stats) {
  ValidateConfig(config);
  const CodecModels& models = *config.models;
  const BitstreamHeader& h = bits.header;
  if (h.version != kBitstreamVersion) {
    Fail(ErrorCode::kUnsupportedVersion, "bitstream version " + std::to_string(h.version));
  }
  if (h.basis_id != models.basis_id || h.codebook_id != models.codebook_id ||
      h.marginal_id != models.marginal_id || h.context_id != models.context_id) {
    Fail(ErrorCode::kModelMismatch, "bitstream was encoded with different models");
  }
  if (h.patch_size != models.basis.patch_size ||
      h.num_subspaces != models.codebook.num_subspaces ||
      h.log2_alphabet != Log2Alphabet(models.codebook.codebook_size)) {
    Fail(ErrorCode::kModelMismatch, "bitstream geometry does not match the models");
  }

  CodecConfig effective = config;
  effective.policy = h.policy;
  effective.num_stages = h.num_stages;
  const int f = h.patch_size;
  TokenGrid grid(GridExtent(static_cast<int>(h.width), f), GridExtent(static_cast<int>(h.height), f),
                 h.num_subspaces);
  StageSchedule schedule;
  try {
    schedule = ScheduleFor(grid, effective);
  } catch (const Error& e) {
    Fail(ErrorCode::kCorruptData, std::string("unusable schedule in header: ") + e.what());
  }

  CodingStats local;
  RangeDecoder decoder(bits.payload);
  WalkStages(grid, models, schedule, local, [&](const IntegerCdf& cdf, int t, int m) {
    const int symbol = decoder.DecodeSymbol(cdf);
    grid.at(t, m) = static_cast<uint16_t>(symbol);
    local.ideal_bits += IdealBits(cdf, symbol);
    ++local.coded_symbols;
  });
  if (decoder.bytes_consumed() != bits.payload.size()) {
    Fail(ErrorCode::kCorruptData, "payload length does not match the coded symbols");
  }
  if (stats != nullptr) *stats = local;
  return grid;
}

ImageBuffer ReconstructImage(const TokenGrid& tokens, const CodecModels& models, int width,
                             int height) {
  return Inverse(Dequantize(tokens, models.codebook), models.basis, width, height);
}

ImageBuffer DecodeImage(const Bitstream& bits, const CodecConfig& config, CodingStats* stats) {
  const TokenGrid tokens = DecodeTokens(bits, config, stats);
  return ReconstructImage(tokens, *config.models, static_cast<int>(bits.header.width),
                          static_cast<int>(bits.header.height));
}

double MeasureRate(size_t stream_bytes, int width, int height) {
  Require(width >= 1 && height >= 1, ErrorCode::kInvalidInput, "bad image size");
  return 8.0 * static_cast<double>(stream_bytes) /
         (static_cast<double>(width) * static_cast<double>(height));
}

double MeasureRate(const Bitstream& bits) {
  return MeasureRate(bits.size_bytes(), static_cast<int>(bits.header.width),
                     static_cast<int>(bits.header.height));
}

TokenGrid Inpaint(const TokenGrid& tokens, std::span<const uint8_t> missing,
                  const ContextModel& model, InpaintMode mode, uint64_t seed, int num_stages) {
  Require(missing.size() == static_cast<size_t>(tokens.size()), ErrorCode::kInvalidInput,
          "missing mask does not match the grid");
  Require(num_stages >= 1, ErrorCode::kInvalidConfig, "stage count must be >= 1");
  const int alphabet = model.shape().alphabet;
  TokenGrid out = tokens;
  std::vector<uint8_t> observed(tokens.size());
  for (int t = 0; t < tokens.size(); ++t) observed[t] = missing[t] ? 0 : 1;

  const StageSchedule schedule =
      BuildSchedule(tokens.grid_w, tokens.grid_h, num_stages, MaskingPolicy::kQuincunx);
  SplitMix64 rng(seed);
  for (const auto& stage : schedule.stages) {
    std::vector<int> positions;
    for (int t : stage) {
      if (missing[t]) positions.push_back(t);
    }
    if (positions.empty()) continue;
    const Predictions preds = model.Predict(out, observed, positions);
    for (size_t i = 0; i < positions.size(); ++i) {
      for (int m = 0; m < out.num_subspaces; ++m) {
        auto p = preds.head(i, m);
        int choice = 0;
        if (mode == InpaintMode::kArgmax) {
          choice = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        } else {
          const double u = rng.NextDouble();
          double running = 0.0;
          choice = alphabet - 1;
          for (int v = 0; v < alphabet; ++v) {
            running += p[v];
            if (u < running) {
              choice = v;
              break;
            }
          }
        }
        out.at(positions[i], m) = static_cast<uint16_t>(choice);
      }
    }
    for (int t : positions) observed[t] = 1;
  }
  return out;
}

}  // namespace pqmim

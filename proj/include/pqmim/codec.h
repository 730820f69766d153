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

#ifndef PQMIM_CODEC_H_
#define PQMIM_CODEC_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "pqmim/entropy_model.h"
#include "pqmim/image.h"
#include "pqmim/quantizer.h"
#include "pqmim/schedule.h"
#include "pqmim/transform.h"

namespace pqmim {

inline constexpr uint8_t kBitstreamVersion = 1;
// magic, version, flags, W, H, f, M, log2 V_s, S, policy, reserved, four
// model ids and the payload length.
inline constexpr size_t kBitstreamHeaderBytes = 56;
inline constexpr size_t kBitstreamTrailerBytes = 4;  // payload CRC32

struct BitstreamHeader {
  uint8_t version = kBitstreamVersion;
  uint8_t flags = 0;
  uint32_t width = 0;
  uint32_t height = 0;
  uint8_t patch_size = 0;
  uint8_t num_subspaces = 0;
  uint8_t log2_alphabet = 0;
  // Stage count; 0 for the raster policy, which uses one stage per token.
  uint8_t num_stages = 0;
  MaskingPolicy policy = MaskingPolicy::kQuincunx;
  uint64_t basis_id = 0;
  uint64_t codebook_id = 0;
  uint64_t marginal_id = 0;
  uint64_t context_id = 0;
  uint32_t payload_len = 0;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<uint8_t> payload;

  size_t size_bytes() const {
    return kBitstreamHeaderBytes + payload.size() + kBitstreamTrailerBytes;
  }
};

// Little-endian layout: "PQMB", header fields, payload, CRC32(payload).
std::vector<uint8_t> SerializeBitstream(const Bitstream& bits);
// Checks magic, version and payload CRC.
Bitstream ParseBitstream(std::span<const uint8_t> bytes);
// Header only; does not require the payload to be present.
BitstreamHeader ParseBitstreamHeader(std::span<const uint8_t> bytes);

// Everything a codec instance needs, with content ids computed once.
struct CodecModels {
  TransformBasis basis;
  PQCodebook codebook;
  MarginalModel marginal;
  ContextModel context;

  uint64_t basis_id = 0;
  uint64_t codebook_id = 0;
  uint64_t marginal_id = 0;
  uint64_t context_id = 0;

  // Recomputes the ids and checks that the artifacts agree on d, M and V_s.
  // Throws kInvalidConfig.
  void Finalize();
};

inline constexpr const char* kBasisFile = "basis.pqb";
inline constexpr const char* kCodebookFile = "codebook.pqc";
inline constexpr const char* kMarginalFile = "marginal.pqmh";
inline constexpr const char* kContextFile = "context.pqm";

std::shared_ptr<const CodecModels> LoadModels(const std::filesystem::path& dir);
void SaveModels(const std::filesystem::path& dir, const CodecModels& models);

struct CodecConfig {
  std::shared_ptr<const CodecModels> models;
  int num_stages = 5;
  MaskingPolicy policy = MaskingPolicy::kQuincunx;

  int patch_size() const { return models->basis.patch_size; }
  int num_subspaces() const { return models->codebook.num_subspaces; }
  int alphabet() const { return models->codebook.codebook_size; }
};

struct CodingStats {
  int predict_calls = 0;
  int coded_symbols = 0;
  double ideal_bits = 0.0;  // sum of -log2 of the quantized symbol widths
};

// Staged entropy coding of a token grid: stage 1 under the marginal model,
// later stages under the context model conditioned on everything coded so
// far. `width`/`height` are the pixel dimensions recorded in the header.
Bitstream EncodeTokens(const TokenGrid& tokens, int width, int height,
                       const CodecConfig& config, CodingStats* stats = nullptr);
Bitstream EncodeImage(const ImageBuffer& image, const CodecConfig& config,
                      CodingStats* stats = nullptr);

// Throws kModelMismatch if the header does not match the loaded models.
TokenGrid DecodeTokens(const Bitstream& bits, const CodecConfig& config,
                       CodingStats* stats = nullptr);
ImageBuffer DecodeImage(const Bitstream& bits, const CodecConfig& config,
                        CodingStats* stats = nullptr);

ImageBuffer ReconstructImage(const TokenGrid& tokens, const CodecModels& models, int width,
                             int height);

// Bits per pixel over the whole stream, header included.
double MeasureRate(const Bitstream& bits);
double MeasureRate(size_t stream_bytes, int width, int height);

enum class InpaintMode { kArgmax, kSample };

// Fills the positions flagged in `missing` from the context model, in
// quincunx stage order over `num_stages` stages, each stage conditioned on
// the observed and already-filled tokens. Argmax mode ignores `seed`.
TokenGrid Inpaint(const TokenGrid& tokens, std::span<const uint8_t> missing,
                  const ContextModel& model, InpaintMode mode, uint64_t seed = 0,
                  int num_stages = 5);

}  // namespace pqmim

#endif  // PQMIM_CODEC_H_

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

#include "pqmim/image.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string>

#include "pqmim/binary_io.h"
#include "pqmim/error.h"

namespace pqmim {

ImageBuffer::ImageBuffer(int width, int height)
    : width_(width), height_(height) {
  Require(width >= 1 && height >= 1, ErrorCode::kInvalidInput,
          "image dimensions must be positive");
  samples_.assign(static_cast<size_t>(width) * height * kChannels, 0);
}

ImageBuffer::ImageBuffer(int width, int height, std::vector<uint8_t> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  Require(width >= 1 && height >= 1, ErrorCode::kInvalidInput,
          "image dimensions must be positive");
  Require(samples_.size() == static_cast<size_t>(width) * height * kChannels,
          ErrorCode::kInvalidInput, "sample count does not match dimensions");
}

ImageBuffer ImageBuffer::Crop(int x0, int y0, int width, int height) const {
  Require(x0 >= 0 && y0 >= 0 && width >= 1 && height >= 1 &&
              x0 + width <= width_ && y0 + height <= height_,
          ErrorCode::kInvalidInput, "crop rectangle outside image");
  ImageBuffer out(width, height);
  for (int y = 0; y < height; ++y) {
    const uint8_t* src = &samples_[(static_cast<size_t>(y0 + y) * width_ + x0) * kChannels];
    std::memcpy(&out.at(0, y, 0), src, static_cast<size_t>(width) * kChannels);
  }
  return out;
}

ImageBuffer ImageBuffer::FlipHorizontal() const {
  ImageBuffer out(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      for (int c = 0; c < kChannels; ++c) out.at(width_ - 1 - x, y, c) = at(x, y, c);
    }
  }
  return out;
}

namespace {

// Skips whitespace and '#' comments in a PNM header.
void SkipPnmSpace(std::span<const uint8_t> bytes, size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
}

int ReadPnmInt(std::span<const uint8_t> bytes, size_t& pos) {
  SkipPnmSpace(bytes, pos);
  long value = 0;
  int digits = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > (1 << 24)) Fail(ErrorCode::kCorruptData, "PPM field too large");
    ++pos;
    ++digits;
  }
  if (digits == 0) Fail(ErrorCode::kCorruptData, "malformed PPM header");
  return static_cast<int>(value);
}

struct PngReadState {
  std::span<const uint8_t> bytes;
  size_t pos = 0;
};

void PngReadCallback(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->bytes.size() - state->pos < length) {
    png_error(png, "truncated PNG");
  }
  std::memcpy(out, state->bytes.data() + state->pos, length);
  state->pos += length;
}

void PngWriteCallback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void PngFlushCallback(png_structp) {}

void PngErrorCallback(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text != nullptr) *text = message;
  png_longjmp(png, 1);
}

void PngWarningCallback(png_structp, png_const_charp) {}

}  // namespace

ImageBuffer DecodePpm(std::span<const uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    Fail(ErrorCode::kCorruptData, "not a binary PPM (P6) file");
  }
  size_t pos = 2;
  const int width = ReadPnmInt(bytes, pos);
  const int height = ReadPnmInt(bytes, pos);
  const int maxval = ReadPnmInt(bytes, pos);
  if (width < 1 || height < 1) Fail(ErrorCode::kCorruptData, "empty PPM image");
  if (maxval != 255) Fail(ErrorCode::kCorruptData, "only 8-bit PPM is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    Fail(ErrorCode::kCorruptData, "malformed PPM header");
  }
  ++pos;
  const size_t count = static_cast<size_t>(width) * height * ImageBuffer::kChannels;
  if (bytes.size() - pos < count) Fail(ErrorCode::kCorruptData, "truncated PPM data");
  std::vector<uint8_t> samples(bytes.begin() + pos, bytes.begin() + pos + count);
  return ImageBuffer(width, height, std::move(samples));
}

std::vector<uint8_t> EncodePpm(const ImageBuffer& image) {
  const std::string header = "P6\n" + std::to_string(image.width()) + " " +
                             std::to_string(image.height()) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.samples().begin(), image.samples().end());
  return out;
}

ImageBuffer DecodePng(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    Fail(ErrorCode::kCorruptData, "not a PNG file");
  }
  std::string error_text;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_text,
                                           PngErrorCallback, PngWarningCallback);
  if (png == nullptr) Fail(ErrorCode::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    Fail(ErrorCode::kIo, "png_create_info_struct failed");
  }

  PngReadState state{bytes, 0};
  std::vector<uint8_t> samples;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    Fail(ErrorCode::kCorruptData, "PNG decode failed: " + error_text);
  }
  png_set_read_fn(png, &state, PngReadCallback);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<size_t>(width) * 3) {
    png_error(png, "unexpected row layout");
  }
  samples.resize(static_cast<size_t>(width) * height * 3);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = &samples[static_cast<size_t>(y) * width * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return ImageBuffer(static_cast<int>(width), static_cast<int>(height), std::move(samples));
}

std::vector<uint8_t> EncodePng(const ImageBuffer& image) {
  std::string error_text;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error_text,
                                            PngErrorCallback, PngWarningCallback);
  if (png == nullptr) Fail(ErrorCode::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    Fail(ErrorCode::kIo, "png_create_info_struct failed");
  }
  std::vector<uint8_t> out;
  std::vector<png_bytep> rows(image.height());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    Fail(ErrorCode::kIo, "PNG encode failed: " + error_text);
  }
  png_set_write_fn(png, &out, PngWriteCallback, PngFlushCallback);
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  auto samples = image.samples();
  for (int y = 0; y < image.height(); ++y) {
    rows[y] = const_cast<png_bytep>(&samples[static_cast<size_t>(y) * image.width() * 3]);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

ImageBuffer ReadImage(const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return DecodePng(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return DecodePpm(bytes);
  Fail(ErrorCode::kCorruptData, "unrecognized image format: " + path.string());
}

void WriteImage(const std::filesystem::path& path, const ImageBuffer& image) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  const std::vector<uint8_t> bytes = ext == ".png" ? EncodePng(image) : EncodePpm(image);
  WriteFileBytes(path, bytes);
}

std::vector<std::filesystem::path> ListImages(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    Fail(ErrorCode::kIo, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pnm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pqmim

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

#ifndef PQMIM_IMAGE_H_
#define PQMIM_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pqmim {

// 8-bit RGB image, row-major, channels interleaved.
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  // Zero-filled. Throws kInvalidInput on a zero or negative dimension.
  ImageBuffer(int width, int height);
  ImageBuffer(int width, int height, std::vector<uint8_t> samples);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  uint8_t at(int x, int y, int c) const {
    return samples_[(static_cast<size_t>(y) * width_ + x) * kChannels + c];
  }
  uint8_t& at(int x, int y, int c) {
    return samples_[(static_cast<size_t>(y) * width_ + x) * kChannels + c];
  }

  std::span<const uint8_t> samples() const { return samples_; }
  std::span<uint8_t> samples() { return samples_; }

  ImageBuffer Crop(int x0, int y0, int width, int height) const;
  ImageBuffer FlipHorizontal() const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> samples_;
};

// Reads PNG (any bit depth / color type, converted to 8-bit RGB) or binary
// PPM (P6, maxval 255). Format is detected from the file signature.
ImageBuffer ReadImage(const std::filesystem::path& path);
ImageBuffer DecodePpm(std::span<const uint8_t> bytes);
ImageBuffer DecodePng(std::span<const uint8_t> bytes);

std::vector<uint8_t> EncodePpm(const ImageBuffer& image);
std::vector<uint8_t> EncodePng(const ImageBuffer& image);

// Chooses PNG for a ".png" extension and PPM otherwise.
void WriteImage(const std::filesystem::path& path, const ImageBuffer& image);

// Images with a .png/.ppm/.pnm extension in `dir`, sorted by file name.
std::vector<std::filesystem::path> ListImages(const std::filesystem::path& dir);

}  // namespace pqmim

#endif  // PQMIM_IMAGE_H_

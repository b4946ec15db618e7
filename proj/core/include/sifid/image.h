// Copyright 2026 The SI-FID Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SIFID_IMAGE_H_
#define SIFID_IMAGE_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace sifid {

// Row-major, channel-interleaved raster with samples in [0, 1].
// Channel count is 1 (gray) or 3 (RGB).
class Image {
 public:
  Image() = default;
  // Zero-filled image. Throws ZeroDimension / InvalidArgument.
  Image(int height, int width, int channels);
  // Takes ownership of `data`; values are clamped into [0, 1].
  Image(int height, int width, int channels, std::vector<float> data);

  static Image Filled(int height, int width, int channels, float value);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  bool SameShape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Decodes 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette) and binary
// PGM/PPM (P5/P6, maxval <= 255). Alpha is discarded.
Image LoadImage(const std::filesystem::path& path);
Image DecodeImage(std::span<const unsigned char> bytes);

// Format follows the extension: .png, .pgm (1 channel) or .ppm (3 channels).
void SaveImage(const Image& img, const std::filesystem::path& path);
std::vector<unsigned char> EncodePng(const Image& img);

// BT.601 luma; 1-channel input is returned unchanged.
Image ToGrayscale(const Image& img);

// Replicates a gray image into 3 channels; RGB input is returned unchanged.
Image ToRgb(const Image& img);

// Bilinear resampling, half-pixel-center convention, clamped output.
Image ResizeBilinear(const Image& img, int out_height, int out_width);

// Copies the rectangle [top, top+height) x [left, left+width).
Image Crop(const Image& img, int top, int left, int height, int width);

// Sorted list of decodable image files (.png/.pgm/.ppm) in `dir`.
std::vector<std::filesystem::path> ListImageFiles(
    const std::filesystem::path& dir);

}  // namespace sifid

#endif  // SIFID_IMAGE_H_

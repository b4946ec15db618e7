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

#include "sifid/image.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "sifid/error.h"

namespace sifid {
namespace fs = std::filesystem;

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                            0x0D, 0x0A, 0x1A, 0x0A};

void CheckShape(int height, int width, int channels) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::kZeroDimension,
                "image dimensions must be positive, got " +
                    std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "channels must be 1 or 3, got " + std::to_string(channels));
  }
}

float Clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

unsigned char Quantize(float v) {
  return static_cast<unsigned char>(std::lround(Clamp01(v) * 255.0f));
}

std::string LowerExtension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// ---------------------------------------------------------------- PNG ----

struct PngReadState {
  std::span<const unsigned char> bytes;
  std::size_t offset = 0;
  std::string error;
};

void PngReadCallback(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->bytes.size()) {
    png_error(png, "unexpected end of PNG stream");
  }
  std::memcpy(out, state->bytes.data() + state->offset, count);
  state->offset += count;
}

void PngErrorCallback(png_structp png, png_const_charp message) {
  auto* msg = static_cast<std::string*>(png_get_error_ptr(png));
  if (msg != nullptr) *msg = message;
  png_longjmp(png, 1);
}

void PngWarningCallback(png_structp, png_const_charp) {}

Image DecodePng(std::span<const unsigned char> bytes) {
  PngReadState state{bytes, 0, {}};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state.error,
                                           PngErrorCallback, PngWarningCallback);
  if (png == nullptr) throw Error(ErrorCode::kCorruptData, "png init failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::kCorruptData, "png init failed");
  }

  // Everything libpng-owned lives in plain locals; the C++ objects that need
  // destruction are created only after the last possible longjmp.
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  volatile int channels = 0;
  volatile bool sixteen_bit = false;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kCorruptData, state.error);
  }

  png_set_read_fn(png, &state, PngReadCallback);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    sixteen_bit = true;
  } else {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    channels = png_get_channels(png, info);
    pixels.resize(static_cast<std::size_t>(width) * height * channels);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
      rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (sixteen_bit) {
    throw Error(ErrorCode::kUnsupportedFormat, "16-bit PNG is not supported");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "unexpected PNG channel count " + std::to_string(channels));
  }
  std::vector<float> data(pixels.size());
  std::transform(pixels.begin(), pixels.end(), data.begin(),
                 [](unsigned char v) { return v / 255.0f; });
  return Image(static_cast<int>(height), static_cast<int>(width), channels,
               std::move(data));
}

void PngWriteCallback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void PngFlushCallback(png_structp) {}

// ---------------------------------------------------------------- PNM ----

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const unsigned char> bytes)
      : bytes_(bytes) {}

  long ReadInt() {
    SkipSpaceAndComments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw Error(ErrorCode::kCorruptData, "malformed PNM header");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1L << 30)) {
        throw Error(ErrorCode::kCorruptData, "PNM header value too large");
      }
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t RasterOffset() const { return pos_ + 1; }

 private:
  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 2;
};

Image DecodePnm(std::span<const unsigned char> bytes) {
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmHeaderReader reader(bytes);
  const long width = reader.ReadInt();
  const long height = reader.ReadInt();
  const long maxval = reader.ReadInt();
  if (maxval > 255) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "16-bit PNM (maxval " + std::to_string(maxval) + ")");
  }
  if (maxval <= 0 || width <= 0 || height <= 0) {
    throw Error(ErrorCode::kCorruptData, "invalid PNM header values");
  }
  const std::size_t count =
      static_cast<std::size_t>(width) * height * channels;
  const std::size_t offset = reader.RasterOffset();
  if (offset > bytes.size() || bytes.size() - offset < count) {
    throw Error(ErrorCode::kCorruptData, "truncated PNM raster");
  }
  std::vector<float> data(count);
  const float scale = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = static_cast<float>(bytes[offset + i]) * scale;
  }
  return Image(static_cast<int>(height), static_cast<int>(width), channels,
               std::move(data));
}

std::vector<unsigned char> EncodePnm(const Image& img) {
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") +
                             "\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (float v : img.data()) out.push_back(Quantize(v));
  return out;
}

std::vector<unsigned char> ReadFileBytes(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kFileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const fs::path& path,
                    const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kWriteFailure, path.string());
}

}  // namespace

Image::Image(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  CheckShape(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0f);
}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels),
      data_(std::move(data)) {
  CheckShape(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw Error(ErrorCode::kShapeMismatch,
                "sample count does not match height*width*channels");
  }
  for (float& v : data_) {
    if (std::isnan(v)) {
      throw Error(ErrorCode::kInvalidArgument, "NaN sample");
    }
    v = Clamp01(v);
  }
}

Image Image::Filled(int height, int width, int channels, float value) {
  Image img(height, width, channels);
  std::fill(img.data_.begin(), img.data_.end(), Clamp01(value));
  return img;
}

Image DecodeImage(std::span<const unsigned char> bytes) {
  if (bytes.size() >= sizeof(kPngSignature) &&
      std::memcmp(bytes.data(), kPngSignature, sizeof(kPngSignature)) == 0) {
    return DecodePng(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' &&
      (bytes[1] == '5' || bytes[1] == '6')) {
    return DecodePnm(bytes);
  }
  throw Error(ErrorCode::kUnsupportedFormat,
              "not a PNG or binary PGM/PPM stream");
}

Image LoadImage(const fs::path& path) {
  const auto bytes = ReadFileBytes(path);
  try {
    return DecodeImage(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> EncodePng(const Image& img) {
  std::vector<unsigned char> out;
  std::vector<unsigned char> pixels(img.size());
  std::transform(img.data().begin(), img.data().end(), pixels.begin(),
                 Quantize);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = pixels.data() +
              static_cast<std::size_t>(y) * img.width() * img.channels();
  }
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error,
                                            PngErrorCallback,
                                            PngWarningCallback);
  if (png == nullptr) throw Error(ErrorCode::kWriteFailure, "png init failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kWriteFailure, error);
  }
  png_set_write_fn(png, &out, PngWriteCallback, PngFlushCallback);
  png_set_IHDR(png, info, img.width(), img.height(), 8,
               img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void SaveImage(const Image& img, const fs::path& path) {
  const std::string ext = LowerExtension(path);
  if (ext == ".png") {
    WriteFileBytes(path, EncodePng(img));
  } else if (ext == ".pgm" || ext == ".ppm") {
    const int expected = ext == ".pgm" ? 1 : 3;
    if (img.channels() != expected) {
      throw Error(ErrorCode::kUnsupportedFormat,
                  ext + " requires " + std::to_string(expected) +
                      " channel(s)");
    }
    WriteFileBytes(path, EncodePnm(img));
  } else {
    throw Error(ErrorCode::kUnsupportedFormat,
                "unknown image extension '" + ext + "'");
  }
}

Image ToGrayscale(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  const auto src = img.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const float luma = 0.299f * src[3 * i] + 0.587f * src[3 * i + 1] +
                       0.114f * src[3 * i + 2];
    dst[i] = Clamp01(luma);
  }
  return out;
}

Image ToRgb(const Image& img) {
  if (img.channels() == 3) return img;
  Image out(img.height(), img.width(), 3);
  const auto src = img.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

Image ResizeBilinear(const Image& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw Error(ErrorCode::kZeroDimension, "resize target must be >= 1x1");
  }
  if (img.empty()) throw Error(ErrorCode::kZeroDimension, "empty image");
  const int channels = img.channels();
  Image out(out_height, out_width, channels);
  const double sy = static_cast<double>(img.height()) / out_height;
  const double sx = static_cast<double>(img.width()) / out_width;

  struct Tap {
    int i0, i1;
    double w1;
  };
  auto make_taps = [](int out_n, int in_n, double scale) {
    std::vector<Tap> taps(out_n);
    for (int o = 0; o < out_n; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, in_n - 1);
      taps[o] = {i0, i1, src - i0};
    }
    return taps;
  };
  const auto ytaps = make_taps(out_height, img.height(), sy);
  const auto xtaps = make_taps(out_width, img.width(), sx);

  for (int y = 0; y < out_height; ++y) {
    const Tap& ty = ytaps[y];
    for (int x = 0; x < out_width; ++x) {
      const Tap& tx = xtaps[x];
      for (int c = 0; c < channels; ++c) {
        const double top = img.at(ty.i0, tx.i0, c) * (1.0 - tx.w1) +
                           img.at(ty.i0, tx.i1, c) * tx.w1;
        const double bottom = img.at(ty.i1, tx.i0, c) * (1.0 - tx.w1) +
                              img.at(ty.i1, tx.i1, c) * tx.w1;
        const double v = top * (1.0 - ty.w1) + bottom * ty.w1;
        out.at(y, x, c) = Clamp01(static_cast<float>(v));
      }
    }
  }
  return out;
}

Image Crop(const Image& img, int top, int left, int height, int width) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kZeroDimension, "crop must be >= 1x1");
  }
  if (top < 0 || left < 0 || top + height > img.height() ||
      left + width > img.width()) {
    throw Error(ErrorCode::kInvalidArgument, "crop rectangle out of bounds");
  }
  Image out(height, width, img.channels());
  const std::size_t row_len = static_cast<std::size_t>(width) * img.channels();
  for (int y = 0; y < height; ++y) {
    const float* src = &img.data()[(static_cast<std::size_t>(top + y) *
                                        img.width() +
                                    left) *
                                   img.channels()];
    std::copy(src, src + row_len,
              out.mutable_data().begin() + static_cast<std::ptrdiff_t>(y * row_len));
  }
  return out;
}

std::vector<fs::path> ListImageFiles(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::kFileNotFound, "not a directory: " + dir.string());
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = LowerExtension(entry.path());
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace sifid

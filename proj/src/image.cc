// Copyright 2026 The EPSBench Authors.
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

#include "epsb/image.h"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "epsb/error.h"

namespace epsb {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

uint8_t ToByte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

}  // namespace

Image ReadPng(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) Fail(ErrorKind::kNotFound, "cannot open image " + path);

  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8)) {
    Fail(ErrorKind::kFormat, "not a PNG file: " + path);
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  Image image;
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    Fail(ErrorKind::kFormat, "corrupt PNG: " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const size_t width = png_get_image_width(png, info);
  const size_t height = png_get_image_height(png, info);
  const size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * height);
  rows.resize(height);
  for (size_t y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  image = Image(height, width);
  for (size_t y = 0; y < height; ++y) {
    for (size_t x = 0; x < width; ++x) {
      for (size_t c = 0; c < 3; ++c) {
        image.at(y, x, c) = rows[y][x * 3 + c] / 255.0;
      }
    }
  }
  return image;
}

void WritePng(const Image& image, const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) Fail(ErrorKind::kIo, "cannot write image " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<png_byte> buffer(image.width * 3 * image.height);
  std::vector<png_bytep> rows(image.height);
  for (size_t y = 0; y < image.height; ++y) {
    rows[y] = buffer.data() + y * image.width * 3;
    for (size_t i = 0; i < image.width * 3; ++i) {
      rows[y][i] = ToByte(image.data[y * image.width * 3 + i]);
    }
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    Fail(ErrorKind::kIo, "failed writing PNG " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image ReadPfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open image " + path);
  std::string magic;
  size_t width = 0, height = 0;
  double scale = 0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (magic != "PF" || !in || width == 0 || height == 0) {
    Fail(ErrorKind::kFormat, "not a color PFM file: " + path);
  }
  const bool little = scale < 0;
  std::vector<uint32_t> raw(width * height * 3);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * 4));
  if (!in) Fail(ErrorKind::kFormat, "truncated PFM file: " + path);
  const bool swap = little != (std::endian::native == std::endian::little);
  Image image(height, width);
  // PFM rows run bottom to top.
  for (size_t row = 0; row < height; ++row) {
    const size_t y = height - 1 - row;
    for (size_t i = 0; i < width * 3; ++i) {
      uint32_t bits = raw[row * width * 3 + i];
      if (swap) bits = __builtin_bswap32(bits);
      image.data[y * width * 3 + i] = std::bit_cast<float>(bits);
    }
  }
  return image;
}

void WritePfm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write image " + path);
  out << "PF\n" << image.width << ' ' << image.height << "\n-1.0\n";
  for (size_t row = 0; row < image.height; ++row) {
    const size_t y = image.height - 1 - row;
    for (size_t i = 0; i < image.width * 3; ++i) {
      uint32_t bits =
          std::bit_cast<uint32_t>(static_cast<float>(image.data[y * image.width * 3 + i]));
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap32(bits);
      }
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

Image ReadImage(const std::string& path) {
  if (EndsWith(path, ".pfm")) return ReadPfm(path);
  return ReadPng(path);
}

void WriteImage(const Image& image, const std::string& path) {
  if (EndsWith(path, ".pfm")) {
    WritePfm(image, path);
  } else {
    WritePng(image, path);
  }
}

Image FlipHorizontal(const Image& image) {
  Image out(image.height, image.width);
  for (size_t y = 0; y < image.height; ++y) {
    for (size_t x = 0; x < image.width; ++x) {
      for (size_t c = 0; c < 3; ++c) {
        out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
      }
    }
  }
  return out;
}

Image Crop(const Image& image, size_t y0, size_t x0, size_t h, size_t w) {
  if (y0 + h > image.height || x0 + w > image.width) {
    Fail(ErrorKind::kRange, "crop window exceeds image bounds");
  }
  Image out(h, w);
  for (size_t y = 0; y < h; ++y) {
    std::copy_n(image.data.begin() + ((y0 + y) * image.width + x0) * 3, w * 3,
                out.data.begin() + y * w * 3);
  }
  return out;
}

Image Clamp01(const Image& image) {
  Image out = image;
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image Quantize8(const Image& image) {
  Image out = image;
  for (double& v : out.data) v = ToByte(v) / 255.0;
  return out;
}

Tensor ImageToTensor(const Image& image) {
  Tensor t({1, 3, image.height, image.width});
  CopyImageToTensor(image, t, 0);
  return t;
}

void CopyImageToTensor(const Image& image, Tensor& tensor, size_t n) {
  if (tensor.rank() != 4 || tensor.dim(1) != 3 ||
      tensor.dim(2) != image.height || tensor.dim(3) != image.width) {
    Fail(ErrorKind::kShape, "image does not fit tensor " +
                                ShapeString(tensor.shape()));
  }
  for (size_t c = 0; c < 3; ++c) {
    for (size_t y = 0; y < image.height; ++y) {
      for (size_t x = 0; x < image.width; ++x) {
        tensor.at(n, c, y, x) = static_cast<Real>(image.at(y, x, c));
      }
    }
  }
}

Image TensorToImage(const Tensor& tensor, size_t n) {
  if (tensor.rank() != 4 || tensor.dim(1) != 3 || n >= tensor.dim(0)) {
    Fail(ErrorKind::kShape,
         "expected N x 3 x H x W tensor, got " + ShapeString(tensor.shape()));
  }
  Image image(tensor.dim(2), tensor.dim(3));
  for (size_t c = 0; c < 3; ++c) {
    for (size_t y = 0; y < image.height; ++y) {
      for (size_t x = 0; x < image.width; ++x) {
        image.at(y, x, c) = tensor.at(n, c, y, x);
      }
    }
  }
  return image;
}

Image SeparableFilter(const Image& image, const std::vector<double>& kernel) {
  if (kernel.size() % 2 == 0) Fail(ErrorKind::kArgument, "kernel length must be odd");
  const long r = static_cast<long>(kernel.size() / 2);
  const long h = static_cast<long>(image.height);
  const long w = static_cast<long>(image.width);
  Image tmp(image.height, image.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (size_t c = 0; c < 3; ++c) {
        double s = 0;
        for (long i = -r; i <= r; ++i) {
          s += kernel[i + r] * image.at(y, std::clamp(x + i, 0L, w - 1), c);
        }
        tmp.at(y, x, c) = s;
      }
    }
  }
  Image out(image.height, image.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (size_t c = 0; c < 3; ++c) {
        double s = 0;
        for (long i = -r; i <= r; ++i) {
          s += kernel[i + r] * tmp.at(std::clamp(y + i, 0L, h - 1), x, c);
        }
        out.at(y, x, c) = s;
      }
    }
  }
  return out;
}

}  // namespace epsb

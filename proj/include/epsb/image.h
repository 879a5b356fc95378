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

#ifndef EPSB_IMAGE_H_
#define EPSB_IMAGE_H_

#include <cstddef>
#include <string>
#include <vector>

#include "epsb/tensor.h"

namespace epsb {

// H x W x 3 raster, channels interleaved, values nominally in [0, 1].
// HDR radiance uses the same container with values > 0.
struct Image {
  Image() = default;
  Image(size_t h, size_t w, double fill = 0.0)
      : height(h), width(w), data(h * w * 3, fill) {}

  size_t height = 0;
  size_t width = 0;
  std::vector<double> data;

  size_t pixels() const { return height * width; }
  double& at(size_t y, size_t x, size_t c) {
    return data[(y * width + x) * 3 + c];
  }
  double at(size_t y, size_t x, size_t c) const {
    return data[(y * width + x) * 3 + c];
  }
  bool SameSize(const Image& other) const {
    return height == other.height && width == other.width;
  }
  bool operator==(const Image& other) const = default;
};

// 8-bit sRGB-agnostic PNG; values are mapped k / 255.
Image ReadPng(const std::string& path);
void WritePng(const Image& image, const std::string& path);

// Portable float map (little-endian, 3 channels) for linear radiance.
Image ReadPfm(const std::string& path);
void WritePfm(const Image& image, const std::string& path);

// Reads by extension: .png or .pfm.
Image ReadImage(const std::string& path);
void WriteImage(const Image& image, const std::string& path);

Image FlipHorizontal(const Image& image);
Image Crop(const Image& image, size_t y, size_t x, size_t h, size_t w);
Image Clamp01(const Image& image);
// Rounds every value to the nearest multiple of 1/255 after clamping.
Image Quantize8(const Image& image);

// Separable filtering with an odd-length kernel and clamp-to-edge borders.
Image SeparableFilter(const Image& image, const std::vector<double>& kernel);

// 1 x 3 x H x W.
Tensor ImageToTensor(const Image& image);
// Writes `image` into sample `n` of an N x 3 x H x W tensor.
void CopyImageToTensor(const Image& image, Tensor& tensor, size_t n);
Image TensorToImage(const Tensor& tensor, size_t n = 0);

}  // namespace epsb

#endif  // EPSB_IMAGE_H_

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

#include "epsb/applications.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epsb/error.h"

namespace epsb {
namespace {

// Replicates a scalar field into three channels.
Image Gray(const std::vector<double>& v, size_t h, size_t w) {
  Image out(h, w);
  for (size_t i = 0; i < v.size(); ++i) {
    for (size_t c = 0; c < 3; ++c) out.data[i * 3 + c] = v[i];
  }
  return out;
}

// Channel mean of a smoother's output.
std::vector<double> SmoothScalar(const ImageFilter& smoother,
                                 const std::vector<double>& v, size_t h, size_t w) {
  const Image s = smoother(Gray(v, h, w));
  if (s.height != h || s.width != w) {
    Fail(ErrorKind::kShape, "smoother changed the image size");
  }
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = (s.data[i * 3] + s.data[i * 3 + 1] + s.data[i * 3 + 2]) / 3.0;
  }
  return out;
}

std::vector<double> GaussianKernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k;
  double s = 0;
  for (int i = -r; i <= r; ++i) {
    k.push_back(std::exp(-0.5 * i * i / (sigma * sigma)));
    s += k.back();
  }
  for (double& v : k) v /= s;
  return k;
}

}  // namespace

double Luminance(const Image& image, size_t y, size_t x) {
  return kLuminanceR * image.at(y, x, 0) + kLuminanceG * image.at(y, x, 1) +
         kLuminanceB * image.at(y, x, 2);
}

HdrImage MakeHdr(Image radiance) {
  HdrImage hdr;
  hdr.min_luminance = std::numeric_limits<double>::infinity();
  hdr.max_luminance = 0;
  for (size_t y = 0; y < radiance.height; ++y) {
    for (size_t x = 0; x < radiance.width; ++x) {
      const double l = Luminance(radiance, y, x);
      if (!(l > 0) || !std::isfinite(l)) {
        Fail(ErrorKind::kValidation, "HDR luminance must be positive; pixel (" +
                                         std::to_string(y) + ", " + std::to_string(x) +
                                         ") has " + std::to_string(l));
      }
      hdr.min_luminance = std::min(hdr.min_luminance, l);
      hdr.max_luminance = std::max(hdr.max_luminance, l);
    }
  }
  if (radiance.pixels() == 0) Fail(ErrorKind::kValidation, "empty HDR image");
  hdr.radiance = std::move(radiance);
  return hdr;
}

HdrImage ReadHdr(const std::string& path) { return MakeHdr(ReadImage(path)); }

Image ToneMap(const HdrImage& hdr, const ImageFilter& smoother,
              const ToneMapOptions& options) {
  if (!(options.compression > 0)) {
    Fail(ErrorKind::kArgument, "compression factor must be positive");
  }
  const Image& in = hdr.radiance;
  const size_t h = in.height, w = in.width, n = in.pixels();
  std::vector<double> lum(n), log_lum(n);
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x < w; ++x) {
      const double l = Luminance(in, y, x);
      if (!(l > 0)) Fail(ErrorKind::kValidation, "HDR luminance must be positive");
      lum[y * w + x] = l;
      log_lum[y * w + x] = std::log10(l);
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(log_lum.begin(), log_lum.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;

  std::vector<double> normalized(n, 0.0);
  if (range > 0) {
    for (size_t i = 0; i < n; ++i) normalized[i] = (log_lum[i] - lo) / range;
  }
  const std::vector<double> smooth = SmoothScalar(smoother, normalized, h, w);

  std::vector<double> out_log(n);
  double base_max = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    const double base = lo + smooth[i] * range;
    const double detail = log_lum[i] - base;
    out_log[i] = options.compression * base + detail;
    base_max = std::max(base_max, options.compression * base);
  }

  Image out(h, w);
  for (size_t i = 0; i < n; ++i) {
    const double display = std::pow(10.0, out_log[i] - base_max);
    for (size_t c = 0; c < 3; ++c) {
      out.data[i * 3 + c] = std::clamp(in.data[i * 3 + c] / lum[i] * display, 0.0, 1.0);
    }
  }
  return out;
}

Image ContrastEnhance(const Image& image, const ImageFilter& smoother,
                      const EnhanceOptions& options) {
  if (!(options.gamma > 0) || !(options.eps > 0)) {
    Fail(ErrorKind::kArgument, "gamma and eps must be positive");
  }
  const size_t h = image.height, w = image.width, n = image.pixels();
  std::vector<double> lum(n);
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x < w; ++x) lum[y * w + x] = Luminance(image, y, x);
  }
  const std::vector<double> illumination = SmoothScalar(smoother, lum, h, w);
  Image out(h, w);
  for (size_t i = 0; i < n; ++i) {
    const double illum = std::max(illumination[i], options.eps);
    const double reflectance = lum[i] / illum;
    const double enhanced = std::pow(illum, options.gamma) * reflectance;
    const double scale = enhanced / std::max(lum[i], options.eps);
    for (size_t c = 0; c < 3; ++c) {
      out.data[i * 3 + c] = std::clamp(image.data[i * 3 + c] * scale, 0.0, 1.0);
    }
  }
  return out;
}

Image IdentitySmooth(const Image& image) { return image; }

Image GaussianSmooth(const Image& image, double sigma) {
  if (!(sigma > 0)) Fail(ErrorKind::kArgument, "gaussian sigma must be positive");
  return SeparableFilter(image, GaussianKernel(sigma));
}

Image BilateralSmooth(const Image& image, double sigma_spatial, double sigma_range) {
  if (!(sigma_spatial > 0) || !(sigma_range > 0)) {
    Fail(ErrorKind::kArgument, "bilateral sigmas must be positive");
  }
  const long r = std::max(1L, static_cast<long>(std::ceil(2 * sigma_spatial)));
  const long h = static_cast<long>(image.height), w = static_cast<long>(image.width);
  const double ks = -0.5 / (sigma_spatial * sigma_spatial);
  const double kr = -0.5 / (sigma_range * sigma_range);
  Image out(image.height, image.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0}, norm = 0;
      for (long dy = -r; dy <= r; ++dy) {
        const long yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (long dx = -r; dx <= r; ++dx) {
          const long xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          double d2 = 0;
          for (size_t c = 0; c < 3; ++c) {
            const double d = image.at(yy, xx, c) - image.at(y, x, c);
            d2 += d * d;
          }
          const double wgt = std::exp(ks * (dy * dy + dx * dx) + kr * d2);
          for (size_t c = 0; c < 3; ++c) acc[c] += wgt * image.at(yy, xx, c);
          norm += wgt;
        }
      }
      for (size_t c = 0; c < 3; ++c) out.at(y, x, c) = acc[c] / norm;
    }
  }
  return out;
}

ImageFilter ModelSmoother(Model& model) {
  return [&model](const Image& image) { return Infer(model, image); };
}

HdrImage TwoPlateauHdr(size_t height, size_t width, double low, double high) {
  Image img(height, width);
  for (size_t y = 0; y < height; ++y) {
    for (size_t x = 0; x < width; ++x) {
      for (size_t c = 0; c < 3; ++c) img.at(y, x, c) = x < width / 2 ? low : high;
    }
  }
  return MakeHdr(std::move(img));
}

Image LowLightScene(size_t height, size_t width, double peak) {
  Image img(height, width);
  const double tint[3] = {1.0, 0.9, 0.8};
  for (size_t y = 0; y < height; ++y) {
    for (size_t x = 0; x < width; ++x) {
      const double illum = 0.5 + 0.5 * static_cast<double>(x) / std::max<size_t>(width - 1, 1);
      const double refl = ((y / 4 + x / 4) % 2 == 0) ? 1.0 : 0.6;
      for (size_t c = 0; c < 3; ++c) img.at(y, x, c) = peak * illum * refl * tint[c];
    }
  }
  return img;
}

}  // namespace epsb

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

// Demonstration pipelines that use a smoother as the decomposition filter.
//
// Tone mapping works on log10 luminance (Rec. 709 weights). The log
// luminance is min-max normalized into [0, 1] before smoothing and mapped
// back afterwards. The compressed base is shifted so its maximum maps to
// display luminance 1; no display gamma is applied. Colors follow the
// per-pixel ratios C / L.
//
// Contrast enhancement splits luminance into illumination (smoother output)
// and reflectance L / max(illumination, eps), raises illumination to
// `gamma` and recombines. Both pipelines clamp their output to [0, 1].

#ifndef EPSB_APPLICATIONS_H_
#define EPSB_APPLICATIONS_H_

#include <functional>
#include <string>

#include "epsb/image.h"
#include "epsb/models.h"

namespace epsb {

using ImageFilter = std::function<Image(const Image&)>;

inline constexpr double kLuminanceR = 0.2126;
inline constexpr double kLuminanceG = 0.7152;
inline constexpr double kLuminanceB = 0.0722;

double Luminance(const Image& image, size_t y, size_t x);

struct HdrImage {
  Image radiance;  // linear, strictly positive luminance
  double min_luminance = 0;
  double max_luminance = 0;

  double DynamicRange() const { return max_luminance / min_luminance; }
};

// Throws kValidation if any pixel has non-positive or non-finite luminance.
HdrImage MakeHdr(Image radiance);
HdrImage ReadHdr(const std::string& path);

struct ToneMapOptions {
  double compression = 0.25;  // scale applied to the log-luminance base
};

Image ToneMap(const HdrImage& hdr, const ImageFilter& smoother,
              const ToneMapOptions& options = {});

struct EnhanceOptions {
  double gamma = 0.5;
  double eps = 1e-4;
};

Image ContrastEnhance(const Image& image, const ImageFilter& smoother,
                      const EnhanceOptions& options = {});

// Reference smoothers.
Image IdentitySmooth(const Image& image);
Image GaussianSmooth(const Image& image, double sigma);
// Brute-force bilateral filter; range distance is Euclidean over RGB.
Image BilateralSmooth(const Image& image, double sigma_spatial, double sigma_range);
// Inference with a trained model, output clamped to [0, 1].
ImageFilter ModelSmoother(Model& model);

// Two horizontal plateaus of radiance `low` (left) and `high` (right),
// gray, with a vertical step edge at width / 2.
HdrImage TwoPlateauHdr(size_t height, size_t width, double low, double high);
// Dim textured scene: smooth illumination gradient times a checker
// reflectance, peak value `peak`.
Image LowLightScene(size_t height, size_t width, double peak);

}  // namespace epsb

#endif  // EPSB_APPLICATIONS_H_

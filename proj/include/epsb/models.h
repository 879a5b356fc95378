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

#ifndef EPSB_MODELS_H_
#define EPSB_MODELS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "epsb/image.h"
#include "epsb/tensor.h"
#include "json.hpp"

namespace epsb {

enum class Architecture { kVdcnn, kResnet };

const char* ArchitectureName(Architecture arch);
Architecture ParseArchitecture(const std::string& name);

// Declarative description of a baseline network.
//
// VDCNN: `conv_layers` 3x3 convolutions, ReLU after all but the last.
// ResNet: head conv + `residual_blocks` x (conv-BN-ReLU-conv-BN + skip) +
// post conv-BN with a long skip back to the head, `tail_convs` conv-ReLU
// layers, and a 3-channel output conv. 1 + 2*16 + 1 + 2 + 1 = 37 convs by
// default. `global_residual` adds the network input to its output.
struct ModelSpec {
  Architecture architecture = Architecture::kVdcnn;
  int conv_layers = 20;
  int residual_blocks = 16;
  int tail_convs = 2;
  int width = 64;
  bool global_residual = false;
  int in_channels = 3;
  int out_channels = 3;

  static ModelSpec Vdcnn();
  static ModelSpec Resnet();
  // Desk-scale variants used for fast training and gradient checks.
  static ModelSpec VdcnnMini();
  static ModelSpec ResnetMini();

  bool operator==(const ModelSpec&) const = default;
};

nlohmann::json ModelSpecToJson(const ModelSpec& spec);
ModelSpec ModelSpecFromJson(const nlohmann::json& j);

struct NamedParam {
  std::string name;
  Var var;
};

class Model {
 public:
  // Builds the layer structure with zero-valued parameters; see
  // InitializeWeights().
  explicit Model(ModelSpec spec);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  // He fan-in normal for kernels, zero biases, gamma = 1 / beta = 0.
  void InitializeWeights(uint64_t seed);

  // N x in_channels x H x W -> N x out_channels x H x W, unclamped.
  Var Forward(const Var& input, NormMode mode);

  const ModelSpec& spec() const { return spec_; }
  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  std::vector<ParamRef> ParamRefs();
  void ZeroGrad();

  struct NormLayer {
    std::string name;
    BatchNormState state;
  };
  std::vector<NormLayer>& norm_layers() { return norms_; }
  const std::vector<NormLayer>& norm_layers() const { return norms_; }

  size_t ParameterCount() const;
  int ConvLayerCount() const { return static_cast<int>(convs_.size()); }
  // 1 + sum over convolutions of (kernel - 1); every conv is 3x3.
  int ReceptiveField() const { return 1 + 2 * ConvLayerCount(); }

  // Deep copy of parameters and running statistics.
  Model Clone() const;

 private:
  struct Conv {
    size_t weight;
    size_t bias;
  };
  struct Norm {
    size_t gamma;
    size_t beta;
    size_t state;
  };

  size_t AddConv(const std::string& name, int in, int out);
  size_t AddNorm(const std::string& name, int channels);
  Var ApplyConv(size_t conv, const Var& x);
  Var ApplyNorm(size_t norm, const Var& x, NormMode mode);

  ModelSpec spec_;
  std::vector<NamedParam> params_;
  std::vector<Conv> convs_;
  std::vector<Norm> norm_index_;
  std::vector<NormLayer> norms_;
};

Model BuildVdcnn(const ModelSpec& spec, uint64_t seed = 1);
Model BuildResnet(const ModelSpec& spec, uint64_t seed = 1);
Model BuildModel(const ModelSpec& spec, uint64_t seed = 1);

// Full-image inference in BN inference mode, output clamped to [0, 1].
Image Infer(Model& model, const Image& image);

struct TrainingMetadata {
  uint64_t step = 0;
  double lr = 0.0;
};

// Checkpoint container: "EPSBCKPT", u32 version, u64 header length, JSON
// header (spec, dtype, tensor directory, metadata), then the tensor payload,
// all little-endian.
inline constexpr uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const Model& model, const std::string& path,
                    const TrainingMetadata& meta = {},
                    const AdamState* optimizer = nullptr);
Model LoadCheckpoint(const std::string& path, TrainingMetadata* meta = nullptr,
                     AdamState* optimizer = nullptr);

struct CheckpointInfo {
  uint32_t version = 0;
  ModelSpec spec;
  std::vector<std::string> model_tensors;  // parameters then BN buffers
  bool has_optimizer = false;
  TrainingMetadata meta;
};
CheckpointInfo ReadCheckpointInfo(const std::string& path);

}  // namespace epsb

#endif  // EPSB_MODELS_H_

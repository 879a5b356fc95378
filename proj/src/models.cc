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

#include "epsb/models.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "epsb/error.h"

namespace epsb {
namespace {

constexpr char kMagic[8] = {'E', 'P', 'S', 'B', 'C', 'K', 'P', 'T'};

#ifdef EPSB_USE_FLOAT32
constexpr const char* kDtype = "f32";
#else
constexpr const char* kDtype = "f64";
#endif

template <typename T>
void WriteLe(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadLe(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) Fail(ErrorKind::kFormat, "truncated checkpoint header: " + path);
  return value;
}

struct TensorEntry {
  std::string name;
  std::string kind;
  Shape shape;
  uint64_t offset;
};

struct ParsedCheckpoint {
  uint32_t version;
  nlohmann::json header;
  std::vector<TensorEntry> entries;
  std::string payload;
  bool f32;
};

ParsedCheckpoint ParseCheckpoint(const std::string& path, bool read_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    Fail(ErrorKind::kFormat,
         "bad checkpoint magic in " + path + " (expected EPSBCKPT format v" +
             std::to_string(kCheckpointVersion) + ")");
  }
  ParsedCheckpoint parsed;
  parsed.version = ReadLe<uint32_t>(in, path);
  if (parsed.version != kCheckpointVersion) {
    Fail(ErrorKind::kFormat, "unsupported checkpoint version " +
                                 std::to_string(parsed.version) + " in " +
                                 path + " (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = ReadLe<uint64_t>(in, path);
  if (header_len > (1u << 30)) {
    Fail(ErrorKind::kFormat, "implausible header length in " + path);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) Fail(ErrorKind::kFormat, "truncated checkpoint header: " + path);
  try {
    parsed.header = nlohmann::json::parse(header);
    const std::string dtype = parsed.header.at("dtype");
    if (dtype != "f32" && dtype != "f64") {
      Fail(ErrorKind::kFormat, "unknown dtype " + dtype + " in " + path);
    }
    parsed.f32 = dtype == "f32";
    for (const auto& t : parsed.header.at("tensors")) {
      parsed.entries.push_back({t.at("name"), t.at("kind"),
                                t.at("shape").get<Shape>(), t.at("offset")});
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat,
         "malformed checkpoint header in " + path + ": " + e.what());
  }
  if (read_payload) {
    const uint64_t payload_len = parsed.header.value("payload_bytes", 0ull);
    parsed.payload.resize(payload_len);
    in.read(parsed.payload.data(), static_cast<std::streamsize>(payload_len));
    if (!in) Fail(ErrorKind::kFormat, "truncated checkpoint payload: " + path);
  }
  return parsed;
}

Tensor ExtractTensor(const ParsedCheckpoint& parsed, const TensorEntry& e,
                     const std::string& path) {
  const size_t count = ShapeSize(e.shape);
  const size_t width = parsed.f32 ? 4 : 8;
  if (e.offset + count * width > parsed.payload.size()) {
    Fail(ErrorKind::kFormat, "tensor " + e.name + " overruns payload in " + path);
  }
  std::vector<Real> data(count);
  const char* src = parsed.payload.data() + e.offset;
  for (size_t i = 0; i < count; ++i) {
    if (parsed.f32) {
      float v;
      std::memcpy(&v, src + i * 4, 4);
      data[i] = static_cast<Real>(v);
    } else {
      double v;
      std::memcpy(&v, src + i * 8, 8);
      data[i] = static_cast<Real>(v);
    }
  }
  return Tensor(e.shape, std::move(data));
}

}  // namespace

const char* ArchitectureName(Architecture arch) {
  return arch == Architecture::kVdcnn ? "vdcnn" : "resnet";
}

Architecture ParseArchitecture(const std::string& name) {
  if (name == "vdcnn") return Architecture::kVdcnn;
  if (name == "resnet") return Architecture::kResnet;
  Fail(ErrorKind::kArgument, "unknown architecture '" + name +
                                 "' (expected vdcnn or resnet)");
}

ModelSpec ModelSpec::Vdcnn() { return ModelSpec{}; }

ModelSpec ModelSpec::Resnet() {
  ModelSpec spec;
  spec.architecture = Architecture::kResnet;
  spec.global_residual = true;
  return spec;
}

ModelSpec ModelSpec::VdcnnMini() {
  ModelSpec spec;
  spec.conv_layers = 6;
  spec.width = 16;
  return spec;
}

ModelSpec ModelSpec::ResnetMini() {
  ModelSpec spec = Resnet();
  spec.residual_blocks = 4;
  spec.width = 16;
  return spec;
}

nlohmann::json ModelSpecToJson(const ModelSpec& spec) {
  return {{"architecture", ArchitectureName(spec.architecture)},
          {"conv_layers", spec.conv_layers},
          {"residual_blocks", spec.residual_blocks},
          {"tail_convs", spec.tail_convs},
          {"width", spec.width},
          {"global_residual", spec.global_residual},
          {"in_channels", spec.in_channels},
          {"out_channels", spec.out_channels}};
}

ModelSpec ModelSpecFromJson(const nlohmann::json& j) {
  ModelSpec spec;
  spec.architecture = ParseArchitecture(j.at("architecture"));
  if (spec.architecture == Architecture::kResnet) spec = ModelSpec::Resnet();
  spec.conv_layers = j.value("conv_layers", spec.conv_layers);
  spec.residual_blocks = j.value("residual_blocks", spec.residual_blocks);
  spec.tail_convs = j.value("tail_convs", spec.tail_convs);
  spec.width = j.value("width", spec.width);
  spec.global_residual = j.value("global_residual", spec.global_residual);
  spec.in_channels = j.value("in_channels", spec.in_channels);
  spec.out_channels = j.value("out_channels", spec.out_channels);
  return spec;
}

Model::Model(ModelSpec spec) : spec_(spec) {
  if (spec_.width < 1 || spec_.in_channels < 1 || spec_.out_channels < 1) {
    Fail(ErrorKind::kArgument, "model widths must be positive");
  }
  const int w = spec_.width;
  if (spec_.global_residual && spec_.in_channels != spec_.out_channels) {
    Fail(ErrorKind::kArgument,
         "global residual needs equal input and output channels");
  }
  if (spec_.architecture == Architecture::kVdcnn) {
    if (spec_.conv_layers < 2) {
      Fail(ErrorKind::kArgument, "vdcnn needs at least 2 conv layers, got " +
                                     std::to_string(spec_.conv_layers));
    }
    AddConv("conv0", spec_.in_channels, w);
    for (int i = 1; i + 1 < spec_.conv_layers; ++i) {
      AddConv("conv" + std::to_string(i), w, w);
    }
    AddConv("conv" + std::to_string(spec_.conv_layers - 1), w,
            spec_.out_channels);
  } else {
    if (spec_.residual_blocks < 1) {
      Fail(ErrorKind::kArgument, "resnet needs at least 1 residual block, got " +
                                     std::to_string(spec_.residual_blocks));
    }
    if (spec_.tail_convs < 0) {
      Fail(ErrorKind::kArgument, "tail_convs must be non-negative");
    }
    AddConv("head", spec_.in_channels, w);
    for (int b = 0; b < spec_.residual_blocks; ++b) {
      const std::string prefix = "block" + std::to_string(b);
      AddConv(prefix + ".conv1", w, w);
      AddNorm(prefix + ".bn1", w);
      AddConv(prefix + ".conv2", w, w);
      AddNorm(prefix + ".bn2", w);
    }
    AddConv("post", w, w);
    AddNorm("post_bn", w);
    for (int t = 0; t < spec_.tail_convs; ++t) {
      AddConv("tail" + std::to_string(t), w, w);
    }
    AddConv("out", w, spec_.out_channels);
  }
}

size_t Model::AddConv(const std::string& name, int in, int out) {
  const auto ui = static_cast<size_t>(in), uo = static_cast<size_t>(out);
  params_.push_back({name + ".weight", Var(Tensor({uo, ui, 3, 3}), true)});
  params_.push_back({name + ".bias", Var(Tensor({uo}), true)});
  convs_.push_back({params_.size() - 2, params_.size() - 1});
  return convs_.size() - 1;
}

size_t Model::AddNorm(const std::string& name, int channels) {
  const auto uc = static_cast<size_t>(channels);
  params_.push_back({name + ".gamma", Var(Tensor({uc}, 1.0), true)});
  params_.push_back({name + ".beta", Var(Tensor({uc}), true)});
  norms_.push_back({name, BatchNormState{}});
  norm_index_.push_back(
      {params_.size() - 2, params_.size() - 1, norms_.size() - 1});
  return norm_index_.size() - 1;
}

void Model::InitializeWeights(uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const Conv& conv : convs_) {
    Tensor& w = params_[conv.weight].var.mutable_value();
    const double fan_in = static_cast<double>(w.dim(1) * w.dim(2) * w.dim(3));
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (Real& v : w.data()) v = static_cast<Real>(dist(rng));
    params_[conv.bias].var.mutable_value().Fill(0);
  }
  for (const Norm& norm : norm_index_) {
    params_[norm.gamma].var.mutable_value().Fill(1);
    params_[norm.beta].var.mutable_value().Fill(0);
    BatchNormState& state = norms_[norm.state].state;
    const size_t channels = params_[norm.gamma].var.value().size();
    state = BatchNormState{};
    state.running_mean = Tensor({channels}, 0.0);
    state.running_var = Tensor({channels}, 1.0);
    state.initialized = true;
  }
}

Var Model::ApplyConv(size_t conv, const Var& x) {
  return Conv2d(x, params_[convs_[conv].weight].var,
                params_[convs_[conv].bias].var);
}

Var Model::ApplyNorm(size_t norm, const Var& x, NormMode mode) {
  const Norm& n = norm_index_[norm];
  return BatchNorm(x, params_[n.gamma].var, params_[n.beta].var, mode,
                   norms_[n.state].state);
}

Var Model::Forward(const Var& input, NormMode mode) {
  const Shape& s = input.shape();
  if (s.size() != 4 || s[1] != static_cast<size_t>(spec_.in_channels)) {
    Fail(ErrorKind::kShape, "model expects N x " +
                                std::to_string(spec_.in_channels) +
                                " x H x W input, got " + ShapeString(s));
  }
  Var out;
  if (spec_.architecture == Architecture::kVdcnn) {
    Var h = input;
    for (size_t i = 0; i + 1 < convs_.size(); ++i) h = Relu(ApplyConv(i, h));
    out = ApplyConv(convs_.size() - 1, h);
  } else {
    size_t conv = 0, norm = 0;
    const Var head = Relu(ApplyConv(conv++, input));
    Var h = head;
    for (int b = 0; b < spec_.residual_blocks; ++b) {
      Var r = Relu(ApplyNorm(norm++, ApplyConv(conv++, h), mode));
      r = ApplyNorm(norm++, ApplyConv(conv++, r), mode);
      h = Add(h, r);
    }
    h = Add(ApplyNorm(norm++, ApplyConv(conv++, h), mode), head);
    for (int t = 0; t < spec_.tail_convs; ++t) h = Relu(ApplyConv(conv++, h));
    out = ApplyConv(conv++, h);
  }
  if (spec_.global_residual) out = Add(out, input);
  return out;
}

std::vector<ParamRef> Model::ParamRefs() {
  std::vector<ParamRef> refs;
  refs.reserve(params_.size());
  for (NamedParam& p : params_) {
    refs.push_back({p.name, &p.var.mutable_value(), &p.var.grad()});
  }
  return refs;
}

void Model::ZeroGrad() {
  for (NamedParam& p : params_) p.var.ZeroGrad();
}

size_t Model::ParameterCount() const {
  size_t n = 0;
  for (const NamedParam& p : params_) n += p.var.value().size();
  return n;
}

Model Model::Clone() const {
  Model copy(spec_);
  for (size_t i = 0; i < params_.size(); ++i) {
    copy.params_[i].var.mutable_value() = params_[i].var.value();
  }
  for (size_t i = 0; i < norms_.size(); ++i) copy.norms_[i] = norms_[i];
  return copy;
}

Model BuildVdcnn(const ModelSpec& spec, uint64_t seed) {
  if (spec.architecture != Architecture::kVdcnn) {
    Fail(ErrorKind::kArgument, "BuildVdcnn given a non-vdcnn spec");
  }
  Model model(spec);
  model.InitializeWeights(seed);
  return model;
}

Model BuildResnet(const ModelSpec& spec, uint64_t seed) {
  if (spec.architecture != Architecture::kResnet) {
    Fail(ErrorKind::kArgument, "BuildResnet given a non-resnet spec");
  }
  Model model(spec);
  model.InitializeWeights(seed);
  return model;
}

Model BuildModel(const ModelSpec& spec, uint64_t seed) {
  return spec.architecture == Architecture::kVdcnn ? BuildVdcnn(spec, seed)
                                                   : BuildResnet(spec, seed);
}

Image Infer(Model& model, const Image& image) {
  NoGradGuard no_grad;
  Var input(ImageToTensor(image));
  Var out = model.Forward(input, NormMode::kInfer);
  return Clamp01(TensorToImage(out.value()));
}

void SaveCheckpoint(const Model& model, const std::string& path,
                    const TrainingMetadata& meta, const AdamState* optimizer) {
  std::vector<std::pair<TensorEntry, const Tensor*>> entries;
  uint64_t offset = 0;
  auto add = [&](const std::string& name, const std::string& kind,
                 const Tensor& t) {
    entries.push_back({{name, kind, t.shape(), offset}, &t});
    offset += t.size() * sizeof(Real);
  };
  for (const NamedParam& p : model.parameters()) add(p.name, "param", p.var.value());
  nlohmann::json norms = nlohmann::json::array();
  for (const auto& n : model.norm_layers()) {
    norms.push_back({{"name", n.name},
                     {"initialized", n.state.initialized},
                     {"momentum", n.state.momentum},
                     {"eps", n.state.eps}});
    if (n.state.initialized) {
      add(n.name + ".running_mean", "buffer", n.state.running_mean);
      add(n.name + ".running_var", "buffer", n.state.running_var);
    }
  }
  nlohmann::json adam = nullptr;
  if (optimizer != nullptr) {
    adam = {{"step", optimizer->step},
            {"lr", optimizer->options.lr},
            {"beta1", optimizer->options.beta1},
            {"beta2", optimizer->options.beta2},
            {"eps", optimizer->options.eps}};
    for (size_t i = 0; i < optimizer->first_moment.size(); ++i) {
      const std::string& name = model.parameters()[i].name;
      add("adam.m." + name, "adam_m", optimizer->first_moment[i]);
      add("adam.v." + name, "adam_v", optimizer->second_moment[i]);
    }
  }

  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [e, t] : entries) {
    tensors.push_back({{"name", e.name},
                       {"kind", e.kind},
                       {"shape", e.shape},
                       {"offset", e.offset}});
  }
  const nlohmann::json header = {
      {"dtype", kDtype},
      {"endianness", "little"},
      {"spec", ModelSpecToJson(model.spec())},
      {"meta", {{"step", meta.step}, {"lr", meta.lr}}},
      {"norms", norms},
      {"optimizer", adam},
      {"tensors", tensors},
      {"payload_bytes", offset}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write checkpoint " + path);
  out.write(kMagic, 8);
  WriteLe<uint32_t>(out, kCheckpointVersion);
  WriteLe<uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [e, t] : entries) {
    out.write(reinterpret_cast<const char*>(t->ptr()),
              static_cast<std::streamsize>(t->size() * sizeof(Real)));
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing checkpoint " + path);
}

Model LoadCheckpoint(const std::string& path, TrainingMetadata* meta,
                     AdamState* optimizer) {
  ParsedCheckpoint parsed = ParseCheckpoint(path, true);
  const nlohmann::json& h = parsed.header;
  ModelSpec spec;
  try {
    spec = ModelSpecFromJson(h.at("spec"));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, "bad model spec in " + path + ": " + e.what());
  }
  Model model(spec);

  std::map<std::string, const TensorEntry*> by_name;
  for (const TensorEntry& e : parsed.entries) by_name[e.name] = &e;
  auto fetch = [&](const std::string& name, const Shape& expected) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      Fail(ErrorKind::kNotFound, "checkpoint " + path + " is missing tensor " + name);
    }
    if (it->second->shape != expected) {
      Fail(ErrorKind::kShape, "tensor " + name + " has shape " +
                                  ShapeString(it->second->shape) +
                                  ", model expects " + ShapeString(expected));
    }
    return ExtractTensor(parsed, *it->second, path);
  };

  for (NamedParam& p : model.parameters()) {
    p.var.mutable_value() = fetch(p.name, p.var.shape());
  }
  const auto& norms = h.value("norms", nlohmann::json::array());
  for (auto& layer : model.norm_layers()) {
    const nlohmann::json* info = nullptr;
    for (const auto& n : norms) {
      if (n.value("name", "") == layer.name) info = &n;
    }
    if (info == nullptr) {
      Fail(ErrorKind::kNotFound, "checkpoint " + path +
                                     " has no record of norm layer " + layer.name);
    }
    layer.state.momentum = info->value("momentum", 0.9);
    layer.state.eps = info->value("eps", 1e-5);
    layer.state.initialized = info->value("initialized", false);
    if (layer.state.initialized) {
      const Shape shape{static_cast<size_t>(spec.width)};
      layer.state.running_mean = fetch(layer.name + ".running_mean", shape);
      layer.state.running_var = fetch(layer.name + ".running_var", shape);
    }
  }
  if (meta != nullptr) {
    meta->step = h.at("meta").value("step", 0ull);
    meta->lr = h.at("meta").value("lr", 0.0);
  }
  if (optimizer != nullptr && !h.at("optimizer").is_null()) {
    const auto& a = h.at("optimizer");
    AdamState state;
    state.step = a.value("step", 0ull);
    state.options.lr = a.value("lr", 1e-3);
    state.options.beta1 = a.value("beta1", 0.9);
    state.options.beta2 = a.value("beta2", 0.999);
    state.options.eps = a.value("eps", 1e-8);
    for (const NamedParam& p : model.parameters()) {
      state.first_moment.push_back(fetch("adam.m." + p.name, p.var.shape()));
      state.second_moment.push_back(fetch("adam.v." + p.name, p.var.shape()));
    }
    *optimizer = std::move(state);
  }
  return model;
}

CheckpointInfo ReadCheckpointInfo(const std::string& path) {
  ParsedCheckpoint parsed = ParseCheckpoint(path, false);
  CheckpointInfo info;
  info.version = parsed.version;
  info.spec = ModelSpecFromJson(parsed.header.at("spec"));
  for (const TensorEntry& e : parsed.entries) {
    if (e.kind == "param" || e.kind == "buffer") {
      info.model_tensors.push_back(e.name);
    } else {
      info.has_optimizer = true;
    }
  }
  info.meta.step = parsed.header.at("meta").value("step", 0ull);
  info.meta.lr = parsed.header.at("meta").value("lr", 0.0);
  return info;
}

}  // namespace epsb

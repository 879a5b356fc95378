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

// Dense tensors with a small reverse-mode autodiff graph.
//
// The op set is deliberately narrow: 3x3 "same" convolution, batch
// normalization, ReLU, elementwise add/mul and a few reductions. Losses
// outside this file hook into the graph through MakeResult().
//
// Activations use N x C x H x W layout; convolution kernels O x I x Kh x Kw.

#ifndef EPSB_TENSOR_H_
#define EPSB_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace epsb {

#ifdef EPSB_USE_FLOAT32
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<size_t>;

std::string ShapeString(const Shape& shape);
size_t ShapeSize(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);
  Tensor(Shape shape, std::vector<Real> data);

  const Shape& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_[i]; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* ptr() { return data_.data(); }
  const Real* ptr() const { return data_.data(); }

  Real& operator[](size_t i) { return data_[i]; }
  Real operator[](size_t i) const { return data_[i]; }

  // 4-D accessors for N x C x H x W tensors.
  Real& at(size_t n, size_t c, size_t y, size_t x) {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  Real at(size_t n, size_t c, size_t y, size_t x) const {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  void Fill(Real value);
  bool AllFinite() const;
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

// One vertex of the autodiff graph. `grad` stays empty until something
// accumulates into it.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& EnsureGrad();
};

// Shared handle to a graph node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->EnsureGrad(); }
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  void ZeroGrad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph construction on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

// Wraps a freshly computed value as a graph node. The node records `inputs`
// and `backward` only if grad mode is on and some input requires grad.
// `backward` receives the result node; its grad is populated when called.
Var MakeResult(Tensor value, std::vector<Var> inputs,
               std::function<void(Node& self)> backward);

// Reverse-mode sweep from a scalar (single-element) output. Gradients
// accumulate into every reachable node that requires grad.
void Backward(const Var& output);

// Zero-padded, stride-1 convolution with an odd square kernel. Output has
// the input's spatial extent.
Var Conv2d(const Var& input, const Var& kernel, const Var& bias);

enum class NormMode { kTrain, kInfer };

// Per-channel running statistics. Momentum m weights the old value:
// running = m * running + (1 - m) * batch.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  bool initialized = false;
  double momentum = 0.9;
  double eps = 1e-5;
};

Var BatchNorm(const Var& input, const Var& gamma, const Var& beta,
              NormMode mode, BatchNormState& state);

Var Relu(const Var& input);
Var Add(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, Real factor);
Var Sum(const Var& a);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  uint64_t step = 0;
};

struct ParamRef {
  std::string_view name;
  Tensor* value;
  const Tensor* grad;  // null or empty means zero gradient
};

// Bias-corrected ADAM update. Moments are allocated (zeroed) on the first
// call. All gradients are checked before any parameter changes.
void AdamStep(std::span<const ParamRef> params, AdamState& state);

// Max over coordinates of |analytic - central difference| /
// max(1, |central difference|). `fn` must return a single-element Var.
// Empty `coords` checks every coordinate.
double GradCheck(const std::function<Var(const Var&)>& fn,
                 const Tensor& input, double h,
                 std::span<const size_t> coords = {});

// Same measure for a leaf that `fn` captures (e.g. a model parameter). The
// leaf's value is perturbed in place and restored.
double GradCheckLeaf(const std::function<Var()>& fn, Var leaf, double h,
                     std::span<const size_t> coords = {});

}  // namespace epsb

#endif  // EPSB_TENSOR_H_

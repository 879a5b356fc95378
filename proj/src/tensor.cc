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

#include "epsb/tensor.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "epsb/error.h"

namespace epsb {
namespace {

using MatrixR =
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<MatrixR>;
using ConstMapMatrix = Eigen::Map<const MatrixR>;

thread_local bool grad_enabled = true;

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.SameShape(b)) {
    Fail(ErrorKind::kShape, std::string(op) + ": shape mismatch " +
                                ShapeString(a.shape()) + " vs " +
                                ShapeString(b.shape()));
  }
}

void RequireRank4(const Tensor& t, const char* op) {
  if (t.rank() != 4) {
    Fail(ErrorKind::kShape, std::string(op) + ": expected N x C x H x W, got " +
                                ShapeString(t.shape()));
  }
}

// cols has (C*K*K) rows and (H*W) columns.
void Im2Col(const Real* image, size_t channels, size_t height, size_t width,
            size_t ksize, Real* cols) {
  const ptrdiff_t pad = static_cast<ptrdiff_t>(ksize / 2);
  const size_t hw = height * width;
  for (size_t c = 0; c < channels; ++c) {
    const Real* plane = image + c * hw;
    for (size_t ky = 0; ky < ksize; ++ky) {
      for (size_t kx = 0; kx < ksize; ++kx) {
        Real* row = cols + ((c * ksize + ky) * ksize + kx) * hw;
        const ptrdiff_t dy = static_cast<ptrdiff_t>(ky) - pad;
        const ptrdiff_t dx = static_cast<ptrdiff_t>(kx) - pad;
        for (size_t y = 0; y < height; ++y) {
          const ptrdiff_t sy = static_cast<ptrdiff_t>(y) + dy;
          Real* out = row + y * width;
          if (sy < 0 || sy >= static_cast<ptrdiff_t>(height)) {
            std::fill(out, out + width, Real(0));
            continue;
          }
          const Real* src = plane + sy * width;
          for (size_t x = 0; x < width; ++x) {
            const ptrdiff_t sx = static_cast<ptrdiff_t>(x) + dx;
            out[x] = (sx < 0 || sx >= static_cast<ptrdiff_t>(width)) ? Real(0)
                                                                     : src[sx];
          }
        }
      }
    }
  }
}

// Adds the column buffer back onto the image gradient.
void Col2ImAdd(const Real* cols, size_t channels, size_t height, size_t width,
               size_t ksize, Real* image) {
  const ptrdiff_t pad = static_cast<ptrdiff_t>(ksize / 2);
  const size_t hw = height * width;
  for (size_t c = 0; c < channels; ++c) {
    Real* plane = image + c * hw;
    for (size_t ky = 0; ky < ksize; ++ky) {
      for (size_t kx = 0; kx < ksize; ++kx) {
        const Real* row = cols + ((c * ksize + ky) * ksize + kx) * hw;
        const ptrdiff_t dy = static_cast<ptrdiff_t>(ky) - pad;
        const ptrdiff_t dx = static_cast<ptrdiff_t>(kx) - pad;
        for (size_t y = 0; y < height; ++y) {
          const ptrdiff_t sy = static_cast<ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<ptrdiff_t>(height)) continue;
          Real* dst = plane + sy * width;
          const Real* in = row + y * width;
          const size_t x_begin = dx < 0 ? static_cast<size_t>(-dx) : 0;
          const size_t x_end =
              dx > 0 ? width - static_cast<size_t>(dx) : width;
          for (size_t x = x_begin; x < x_end; ++x) dst[x + dx] += in[x];
        }
      }
    }
  }
}

}  // namespace

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

size_t ShapeSize(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(ShapeSize(shape_), fill) {
  for (size_t d : shape_) {
    if (d == 0) Fail(ErrorKind::kShape, "tensor extents must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (size_t d : shape_) {
    if (d == 0) Fail(ErrorKind::kShape, "tensor extents must be positive");
  }
  if (ShapeSize(shape_) != data_.size()) {
    Fail(ErrorKind::kShape, "data length " + std::to_string(data_.size()) +
                                " does not match shape " +
                                ShapeString(shape_));
  }
}

void Tensor::Fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Real v) { return std::isfinite(v); });
}

Tensor& Node::EnsureGrad() {
  if (grad.empty()) grad = Tensor(value.shape(), Real(0));
  return grad;
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::ZeroGrad() {
  if (!node_->grad.empty()) node_->grad.Fill(0);
}

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

bool GradEnabled() { return grad_enabled; }

Var MakeResult(Tensor value, std::vector<Var> inputs,
               std::function<void(Node& self)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (grad_enabled) {
    for (const Var& in : inputs) {
      if (in.requires_grad()) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const Var& in : inputs) node->inputs.push_back(in.shared());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void Backward(const Var& output) {
  if (output.value().size() != 1) {
    Fail(ErrorKind::kShape, "Backward: output must be a single element, got " +
                                ShapeString(output.shape()));
  }
  if (!output.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(output.node(), 0);
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  output.node()->EnsureGrad()[0] += 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

Var Conv2d(const Var& input, const Var& kernel, const Var& bias) {
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  const Tensor& b = bias.value();
  RequireRank4(x, "conv2d input");
  RequireRank4(w, "conv2d kernel");
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const size_t o = w.dim(0), k = w.dim(2);
  if (w.dim(1) != c) {
    Fail(ErrorKind::kShape, "conv2d: input has " + std::to_string(c) +
                                " channels but kernel expects " +
                                std::to_string(w.dim(1)));
  }
  if (w.dim(3) != k || k % 2 == 0) {
    Fail(ErrorKind::kShape,
         "conv2d: kernel must be square and odd, got " + ShapeString(w.shape()));
  }
  if (b.rank() != 1 || b.dim(0) != o) {
    Fail(ErrorKind::kShape, "conv2d: bias shape " + ShapeString(b.shape()) +
                                " does not match " + std::to_string(o) +
                                " output channels");
  }

  const size_t hw = h * wd;
  const size_t ckk = c * k * k;
  Tensor out({n, o, h, wd});
  std::vector<Real> cols(ckk * hw);
  ConstMapMatrix wmat(w.ptr(), o, ckk);
  for (size_t s = 0; s < n; ++s) {
    Im2Col(x.ptr() + s * c * hw, c, h, wd, k, cols.data());
    MapMatrix res(out.ptr() + s * o * hw, o, hw);
    res.noalias() = wmat * ConstMapMatrix(cols.data(), ckk, hw);
    for (size_t oc = 0; oc < o; ++oc) res.row(oc).array() += b[oc];
  }

  return MakeResult(
      std::move(out), {input, kernel, bias},
      [n, c, h, wd, o, k, hw, ckk](Node& self) {
        Node& in = *self.inputs[0];
        Node& ker = *self.inputs[1];
        Node& bs = *self.inputs[2];
        const Tensor& gout = self.grad;
        ConstMapMatrix wmat(ker.value.ptr(), o, ckk);
        std::vector<Real> cols(ckk * hw);
        // Samples are reduced in index order so results do not depend on
        // how the batch is scheduled.
        for (size_t s = 0; s < n; ++s) {
          ConstMapMatrix g(gout.ptr() + s * o * hw, o, hw);
          if (ker.requires_grad || in.requires_grad) {
            Im2Col(in.value.ptr() + s * c * hw, c, h, wd, k, cols.data());
          }
          if (ker.requires_grad) {
            MapMatrix gw(ker.EnsureGrad().ptr(), o, ckk);
            gw.noalias() +=
                g * ConstMapMatrix(cols.data(), ckk, hw).transpose();
          }
          if (bs.requires_grad) {
            Tensor& gb = bs.EnsureGrad();
            const Real* row = gout.ptr() + s * o * hw;
            for (size_t oc = 0; oc < o; ++oc, row += hw) {
              Real acc = 0;
              for (size_t i = 0; i < hw; ++i) acc += row[i];
              gb[oc] += acc;
            }
          }
          if (in.requires_grad) {
            MapMatrix dcols(cols.data(), ckk, hw);
            dcols.noalias() = wmat.transpose() * g;
            Col2ImAdd(cols.data(), c, h, wd, k,
                      in.EnsureGrad().ptr() + s * c * hw);
          }
        }
      });
}

Var BatchNorm(const Var& input, const Var& gamma, const Var& beta,
              NormMode mode, BatchNormState& state) {
  const Tensor& x = input.value();
  RequireRank4(x, "batchnorm input");
  const size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.value().size() != c || beta.value().size() != c) {
    Fail(ErrorKind::kShape, "batchnorm: affine parameters must have " +
                                std::to_string(c) + " entries");
  }
  const double count = static_cast<double>(n * hw);
  std::vector<Real> mean(c), invstd(c);

  if (mode == NormMode::kTrain) {
    std::vector<Real> var(c);
    for (size_t ch = 0; ch < c; ++ch) {
      double sum = 0;
      for (size_t s = 0; s < n; ++s) {
        const Real* p = x.ptr() + (s * c + ch) * hw;
        for (size_t i = 0; i < hw; ++i) sum += p[i];
      }
      const double mu = sum / count;
      double sq = 0;
      for (size_t s = 0; s < n; ++s) {
        const Real* p = x.ptr() + (s * c + ch) * hw;
        for (size_t i = 0; i < hw; ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      mean[ch] = static_cast<Real>(mu);
      var[ch] = static_cast<Real>(sq / count);
      invstd[ch] = static_cast<Real>(1.0 / std::sqrt(sq / count + state.eps));
    }
    if (!state.initialized) {
      state.running_mean = Tensor({c}, std::vector<Real>(mean));
      state.running_var = Tensor({c}, std::vector<Real>(var));
      state.initialized = true;
    } else {
      const double m = state.momentum;
      for (size_t ch = 0; ch < c; ++ch) {
        state.running_mean[ch] =
            static_cast<Real>(m * state.running_mean[ch] + (1 - m) * mean[ch]);
        state.running_var[ch] =
            static_cast<Real>(m * state.running_var[ch] + (1 - m) * var[ch]);
      }
    }
  } else {
    if (!state.initialized) {
      Fail(ErrorKind::kState,
           "batchnorm: inference requested but running statistics are "
           "uninitialized");
    }
    for (size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      invstd[ch] = static_cast<Real>(
          1.0 / std::sqrt(state.running_var[ch] + state.eps));
    }
  }

  Tensor xhat(x.shape());
  Tensor out(x.shape());
  const Tensor& g = gamma.value();
  const Tensor& bt = beta.value();
  for (size_t s = 0; s < n; ++s) {
    for (size_t ch = 0; ch < c; ++ch) {
      const size_t off = (s * c + ch) * hw;
      for (size_t i = 0; i < hw; ++i) {
        const Real v = (x[off + i] - mean[ch]) * invstd[ch];
        xhat[off + i] = v;
        out[off + i] = g[ch] * v + bt[ch];
      }
    }
  }

  const bool train = mode == NormMode::kTrain;
  return MakeResult(
      std::move(out), {input, gamma, beta},
      [n, c, hw, count, train, invstd = std::move(invstd),
       xhat = std::move(xhat)](Node& self) {
        Node& in = *self.inputs[0];
        Node& gm = *self.inputs[1];
        Node& bt = *self.inputs[2];
        const Tensor& gy = self.grad;
        for (size_t ch = 0; ch < c; ++ch) {
          double dbeta = 0, dgamma = 0;
          for (size_t s = 0; s < n; ++s) {
            const size_t off = (s * c + ch) * hw;
            for (size_t i = 0; i < hw; ++i) {
              dbeta += gy[off + i];
              dgamma += gy[off + i] * xhat[off + i];
            }
          }
          if (gm.requires_grad) gm.EnsureGrad()[ch] += static_cast<Real>(dgamma);
          if (bt.requires_grad) bt.EnsureGrad()[ch] += static_cast<Real>(dbeta);
          if (!in.requires_grad) continue;
          Tensor& gx = in.EnsureGrad();
          const double scale = gm.value[ch] * invstd[ch];
          for (size_t s = 0; s < n; ++s) {
            const size_t off = (s * c + ch) * hw;
            for (size_t i = 0; i < hw; ++i) {
              if (train) {
                gx[off + i] += static_cast<Real>(
                    scale / count *
                    (count * gy[off + i] - dbeta - xhat[off + i] * dgamma));
              } else {
                gx[off + i] += static_cast<Real>(scale * gy[off + i]);
              }
            }
          }
        }
      });
}

Var Relu(const Var& input) {
  const Tensor& x = input.value();
  Tensor out(x.shape());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : Real(0);
  return MakeResult(std::move(out), {input}, [](Node& self) {
    Node& in = *self.inputs[0];
    Tensor& gx = in.EnsureGrad();
    // Subgradient at exactly zero is 0.
    for (size_t i = 0; i < gx.size(); ++i) {
      if (in.value[i] > 0) gx[i] += self.grad[i];
    }
  });
}

Var Add(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return MakeResult(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      Tensor& g = in->EnsureGrad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var Mul(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return MakeResult(std::move(out), {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      Tensor& g = x.EnsureGrad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      Tensor& g = y.EnsureGrad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Var Scale(const Var& a, Real factor) {
  Tensor out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return MakeResult(std::move(out), {a}, [factor](Node& self) {
    Tensor& g = self.inputs[0]->EnsureGrad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Var Sum(const Var& a) {
  double total = 0;
  for (Real v : a.value().data()) total += v;
  Tensor out({1}, static_cast<Real>(total));
  return MakeResult(std::move(out), {a}, [](Node& self) {
    Tensor& g = self.inputs[0]->EnsureGrad();
    const Real up = self.grad[0];
    for (size_t i = 0; i < g.size(); ++i) g[i] += up;
  });
}

void AdamStep(std::span<const ParamRef> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const ParamRef& p : params) {
      state.first_moment.emplace_back(p.value->shape(), Real(0));
      state.second_moment.emplace_back(p.value->shape(), Real(0));
    }
  }
  if (state.first_moment.size() != params.size()) {
    Fail(ErrorKind::kShape, "adam: optimizer state tracks " +
                                std::to_string(state.first_moment.size()) +
                                " parameters but " +
                                std::to_string(params.size()) + " were given");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const ParamRef& p = params[i];
    if (!state.first_moment[i].SameShape(*p.value)) {
      Fail(ErrorKind::kShape,
           "adam: moment shape mismatch for " + std::string(p.name));
    }
    if (p.grad == nullptr || p.grad->empty()) continue;
    if (!p.grad->SameShape(*p.value)) {
      Fail(ErrorKind::kShape, "adam: gradient shape " +
                                  ShapeString(p.grad->shape()) +
                                  " does not match parameter " +
                                  std::string(p.name) + " " +
                                  ShapeString(p.value->shape()));
    }
    if (!p.grad->AllFinite()) {
      Fail(ErrorKind::kNumeric,
           "adam: non-finite gradient for parameter " + std::string(p.name));
    }
  }

  const AdamOptions& opt = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1 - std::pow(opt.beta1, t);
  const double c2 = 1 - std::pow(opt.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    const ParamRef& p = params[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const bool has_grad = p.grad != nullptr && !p.grad->empty();
    for (size_t j = 0; j < m.size(); ++j) {
      const double g = has_grad ? (*p.grad)[j] : 0.0;
      const double mj = opt.beta1 * m[j] + (1 - opt.beta1) * g;
      const double vj = opt.beta2 * v[j] + (1 - opt.beta2) * g * g;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      const double update = opt.lr * (mj / c1) / (std::sqrt(vj / c2) + opt.eps);
      (*p.value)[j] = static_cast<Real>((*p.value)[j] - update);
    }
  }
}

double GradCheckLeaf(const std::function<Var()>& fn, Var leaf, double h,
                     std::span<const size_t> coords) {
  leaf.ZeroGrad();
  Var out = fn();
  Backward(out);
  Tensor analytic = leaf.grad().empty() ? Tensor(leaf.shape(), Real(0))
                                        : leaf.grad();

  std::vector<size_t> all;
  if (coords.empty()) {
    all.resize(leaf.value().size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }

  NoGradGuard no_grad;
  Tensor& value = leaf.mutable_value();
  double worst = 0;
  for (size_t i : coords) {
    if (i >= value.size()) {
      Fail(ErrorKind::kRange, "gradient check coordinate " + std::to_string(i) +
                                  " outside a tensor of " + std::to_string(value.size()));
    }
    const Real saved = value[i];
    value[i] = static_cast<Real>(saved + h);
    const double plus = fn().value()[0];
    value[i] = static_cast<Real>(saved - h);
    const double minus = fn().value()[0];
    value[i] = saved;
    const double numeric = (plus - minus) / (2 * h);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

double GradCheck(const std::function<Var(const Var&)>& fn,
                 const Tensor& input, double h,
                 std::span<const size_t> coords) {
  Var leaf(input, true);
  return GradCheckLeaf([&] { return fn(leaf); }, leaf, h, coords);
}

}  // namespace epsb

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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "epsb/error.h"
#include "epsb/tensor.h"

namespace epsb {
namespace {

Tensor Random(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Real& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

// Seven nested loops, zero padding.
Tensor NaiveConv(const Tensor& x, const Tensor& w, const Tensor& b) {
  const size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const size_t co = w.dim(0), k = w.dim(2);
  const long r = static_cast<long>(k / 2);
  Tensor y({n, co, h, wd});
  for (size_t s = 0; s < n; ++s)
    for (size_t o = 0; o < co; ++o)
      for (size_t i = 0; i < h; ++i)
        for (size_t j = 0; j < wd; ++j) {
          double acc = b[o];
          for (size_t c = 0; c < ci; ++c)
            for (size_t u = 0; u < k; ++u)
              for (size_t v = 0; v < k; ++v) {
                const long yy = static_cast<long>(i + u) - r;
                const long xx = static_cast<long>(j + v) - r;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) ||
                    xx >= static_cast<long>(wd))
                  continue;
                acc += w.at(o, c, u, v) * x.at(s, c, yy, xx);
              }
          y.at(s, o, i, j) = static_cast<Real>(acc);
        }
  return y;
}

// Weighted sum with fixed random weights, so every output element matters.
Var Probe(const Var& y, const Tensor& weights) {
  return Sum(Mul(y, Var(weights)));
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("conv2d matches a naive loop oracle") {
  std::mt19937_64 rng(1);
  for (size_t k : {1, 3, 5}) {
    const Tensor x = Random({2, 3, 6, 5}, rng);
    const Tensor w = Random({4, 3, k, k}, rng);
    const Tensor b = Random({4}, rng);
    const Tensor got = Conv2d(Var(x), Var(w), Var(b)).value();
    const Tensor want = NaiveConv(x, w, b);
    REQUIRE(got.shape() == want.shape());
    for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d rejects even kernels and channel mismatches") {
  CHECK_THROWS_AS(Conv2d(Var(Tensor({1, 3, 4, 4})), Var(Tensor({2, 3, 2, 2})),
                         Var(Tensor({2}))),
                  Error);
  CHECK_THROWS_AS(Conv2d(Var(Tensor({1, 2, 4, 4})), Var(Tensor({2, 3, 3, 3})),
                         Var(Tensor({2}))),
                  Error);
}

TEST_CASE("conv2d gradients match central differences") {
  std::mt19937_64 rng(2);
  const Tensor x = Random({2, 2, 5, 4}, rng);
  Var w(Random({3, 2, 3, 3}, rng), true);
  Var b(Random({3}, rng), true);
  const Tensor probe = Random({2, 3, 5, 4}, rng);
  CHECK(GradCheck([&](const Var& in) { return Probe(Conv2d(in, w, b), probe); }, x,
                  1e-6) < 1e-6);
  Var xin(x);
  CHECK(GradCheckLeaf([&] { return Probe(Conv2d(xin, w, b), probe); }, w, 1e-6) < 1e-6);
  CHECK(GradCheckLeaf([&] { return Probe(Conv2d(xin, w, b), probe); }, b, 1e-6) < 1e-6);
}

TEST_CASE("gradient check rejects coordinates outside the tensor") {
  const size_t coords[] = {4};
  CHECK_THROWS_AS(GradCheck([](const Var& in) { return Sum(in); }, Tensor({2, 2}), 1e-6,
                            coords),
                  Error);
}

TEST_CASE("batchnorm training mode normalizes with batch statistics") {
  std::mt19937_64 rng(3);
  const Tensor x = Random({3, 2, 4, 4}, rng, 2.0);
  Var gamma(Tensor({2}, std::vector<Real>{1.5, 0.5}));
  Var beta(Tensor({2}, std::vector<Real>{0.1, -0.2}));
  BatchNormState st;
  const Tensor y = BatchNorm(Var(x), gamma, beta, NormMode::kTrain, st).value();
  for (size_t c = 0; c < 2; ++c) {
    double mean = 0, sq = 0;
    const double count = 3 * 16;
    for (size_t n = 0; n < 3; ++n)
      for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j) mean += x.at(n, c, i, j);
    mean /= count;
    for (size_t n = 0; n < 3; ++n)
      for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j) sq += std::pow(x.at(n, c, i, j) - mean, 2);
    const double var = sq / count;
    CHECK(st.running_mean[c] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(st.running_var[c] == doctest::Approx(var).epsilon(1e-12));
    for (size_t n = 0; n < 3; ++n) {
      const double want = gamma.value()[c] * (x.at(n, c, 1, 2) - mean) /
                              std::sqrt(var + 1e-5) +
                          beta.value()[c];
      CHECK(y.at(n, c, 1, 2) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("batchnorm running statistics follow the EMA after the first batch") {
  std::mt19937_64 rng(4);
  Var gamma(Tensor({1}, 1.0)), beta(Tensor({1}, 0.0));
  BatchNormState st;
  const Tensor a = Random({2, 1, 3, 3}, rng), b = Random({2, 1, 3, 3}, rng);
  BatchNorm(Var(a), gamma, beta, NormMode::kTrain, st);
  const double m1 = st.running_mean[0];
  BatchNormState fresh;
  BatchNorm(Var(b), gamma, beta, NormMode::kTrain, fresh);
  BatchNorm(Var(b), gamma, beta, NormMode::kTrain, st);
  CHECK(st.running_mean[0] == doctest::Approx(0.9 * m1 + 0.1 * fresh.running_mean[0]));
}

TEST_CASE("batchnorm inference without statistics is a state error") {
  BatchNormState st;
  try {
    BatchNorm(Var(Tensor({1, 1, 2, 2})), Var(Tensor({1}, 1.0)), Var(Tensor({1})),
              NormMode::kInfer, st);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kState);
  }
}

TEST_CASE("batchnorm, relu and add gradients match central differences") {
  std::mt19937_64 rng(5);
  const Tensor x = Random({2, 3, 3, 3}, rng);
  Var gamma(Random({3}, rng), true), beta(Random({3}, rng), true);
  Var other(Random({2, 3, 3, 3}, rng), true);
  const Tensor probe = Random({2, 3, 3, 3}, rng);
  auto f = [&](const Var& in) {
    BatchNormState st;
    return Probe(Add(Relu(BatchNorm(in, gamma, beta, NormMode::kTrain, st)), other),
                 probe);
  };
  CHECK(GradCheck(f, x, 1e-6) < 1e-4);
  Var xin(x);
  CHECK(GradCheckLeaf([&] { return f(xin); }, gamma, 1e-6) < 1e-4);
  CHECK(GradCheckLeaf([&] { return f(xin); }, beta, 1e-6) < 1e-4);
  CHECK(GradCheckLeaf([&] { return f(xin); }, other, 1e-6) < 1e-4);
}

TEST_CASE("backward requires a scalar output") {
  Var a(Tensor({2}, 1.0), true);
  CHECK_THROWS_AS(Backward(Scale(a, 2)), Error);
}

TEST_CASE("no-grad guard stops graph construction") {
  Var a(Tensor({2}, 1.0), true);
  {
    NoGradGuard guard;
    CHECK_FALSE(GradEnabled());
    Var s = Sum(Scale(a, 3));
    CHECK_FALSE(s.requires_grad());
  }
  CHECK(GradEnabled());
  Var s = Sum(Scale(a, 3));
  Backward(s);
  CHECK(a.grad()[0] == 3);
}

TEST_CASE("adam matches a scalar reference over several steps") {
  std::mt19937_64 rng(6);
  Tensor p = Random({5}, rng);
  std::vector<double> ref(p.data().begin(), p.data().end());
  std::vector<double> m(5, 0), v(5, 0);
  AdamState st;
  st.options = {0.01, 0.8, 0.95, 1e-6};
  for (int t = 1; t <= 6; ++t) {
    const Tensor g = Random({5}, rng);
    const ParamRef refs[] = {{"p", &p, &g}};
    AdamStep(refs, st);
    for (size_t i = 0; i < 5; ++i) {
      m[i] = 0.8 * m[i] + 0.2 * g[i];
      v[i] = 0.95 * v[i] + 0.05 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.8, t));
      const double vh = v[i] / (1 - std::pow(0.95, t));
      ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-6);
    }
  }
  for (size_t i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  CHECK(st.step == 6);
}

TEST_CASE("adam refuses non-finite gradients before touching any parameter") {
  Tensor a({2}, 1.0), b({2}, 1.0);
  Tensor ga({2}, 0.5), gb({2}, 0.5);
  gb[1] = NAN;
  const ParamRef refs[] = {{"alpha", &a, &ga}, {"beta", &b, &gb}};
  AdamState st;
  try {
    AdamStep(refs, st);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
  CHECK(a[0] == 1.0);
  CHECK(b[0] == 1.0);
}

TEST_CASE("adam with zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(7);
  Tensor p = Random({4}, rng);
  const Tensor before = p;
  const Tensor g = Random({4}, rng);
  AdamState st;
  st.options.lr = 0;
  const ParamRef refs[] = {{"p", &p, &g}};
  for (int i = 0; i < 3; ++i) AdamStep(refs, st);
  CHECK(p.data()[0] == before.data()[0]);
  for (size_t i = 0; i < 4; ++i) CHECK(p[i] == before[i]);
}

TEST_CASE("adam rejects gradient shape mismatches") {
  Tensor p({2}), g({3});
  const ParamRef refs[] = {{"p", &p, &g}};
  AdamState st;
  CHECK_THROWS_AS(AdamStep(refs, st), Error);
}

}  // TEST_SUITE

}  // namespace epsb

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mindeeg/errors.hpp"
#include "mindeeg/graph.hpp"
#include "mindeeg/magcn.hpp"
#include "support.hpp"

using namespace mindeeg;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

void fill(Tensor t, double value) {
  for (auto& v : t.mutable_data()) v = value;
}

void copy_into(Tensor dst, const Tensor& src) {
  std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}

// Saturates both gates at 1 (sigmoid(60) rounds to 1.0 in double).
void open_gates(CbamBlock& cbam) {
  fill(cbam.node_squeeze.weight, 0.0);
  fill(cbam.node_expand.weight, 0.0);
  fill(cbam.node_expand.bias, 30.0);
  fill(cbam.feature_proj.weight, 0.0);
  fill(cbam.feature_proj.bias, 60.0);
}

double sigmoid_ref(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Row-vector Linear applied to a plain std::vector.
std::vector<double> linear_ref(const Linear& l, const std::vector<double>& x) {
  const std::size_t in = l.weight.rows(), out = l.weight.cols();
  std::vector<double> y(out, 0.0);
  for (std::size_t j = 0; j < out; ++j) {
    for (std::size_t i = 0; i < in; ++i) y[j] += x[i] * l.weight(i, j);
    if (l.bias.defined()) y[j] += l.bias[j];
  }
  return y;
}

// Two-stage gating written out with loops.
std::vector<double> cbam_ref(const CbamBlock& b, const Tensor& h) {
  const std::size_t n = h.rows(), f = h.cols();
  std::vector<double> node_max(n), node_mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    node_max[i] = h(i, 0);
    for (std::size_t j = 0; j < f; ++j) {
      node_max[i] = std::max(node_max[i], h(i, j));
      node_mean[i] += h(i, j) / static_cast<double>(f);
    }
  }
  auto shared = [&](const std::vector<double>& v) {
    auto s = linear_ref(b.node_squeeze, v);
    for (auto& x : s) x = std::max(0.0, x);
    return linear_ref(b.node_expand, s);
  };
  const auto a = shared(node_max), m = shared(node_mean);
  std::vector<double> g(n * f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) g[i * f + j] = h(i, j) * sigmoid_ref(a[i] + m[i]);

  std::vector<double> pooled(2 * f, 0.0);
  for (std::size_t j = 0; j < f; ++j) {
    pooled[j] = g[j];
    for (std::size_t i = 0; i < n; ++i) {
      pooled[j] = std::max(pooled[j], g[i * f + j]);
      pooled[f + j] += g[i * f + j] / static_cast<double>(n);
    }
  }
  const auto score = linear_ref(b.feature_proj, pooled);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) g[i * f + j] *= sigmoid_ref(score[j]);
  return g;
}

Tensor random_adjacency(std::size_t n, Rng& rng) {
  Tensor a = random_tensor({n, n}, rng, 0.0, 1.0, false);
  NoGradGuard no_grad;
  return add(a, transpose(a));
}

}  // namespace

TEST_CASE("gcn layer examples") {
  Rng rng(1);
  GcnLayer id(2, 2, rng, Activation::Identity);
  copy_into(id.weight, Tensor::identity(2));
  Tensor h = Tensor::matrix({{2, -1}, {0.5, 3}});
  CHECK(max_abs_diff(id.forward(h, Tensor::identity(2)).data(), h.data()) == 0.0);

  const Tensor half = Tensor::filled({2, 2}, 0.5);
  const Tensor out = id.forward(Tensor::matrix({{2, 0}, {0, 2}}), half);
  for (double v : out.data()) CHECK(v == 1.0);

  CHECK_THROWS_AS(id.forward(h, Tensor::identity(3)), ShapeError);
}

TEST_CASE("property: gcn layer agrees with a dense triple product") {
  Rng rng(2);
  std::uniform_int_distribution<std::size_t> extent(1, 7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = extent(rng), in = extent(rng), out = extent(rng);
    GcnLayer layer(in, out, rng);
    Tensor l = random_tensor({n, n}, rng, -1.0, 1.0, false), h = random_tensor({n, in}, rng, -1.0, 1.0, false);
    const Tensor y = layer.forward(h, l);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < out; ++j) {
        double acc = 0.0;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < in; ++b) acc += l(i, a) * h(a, b) * layer.weight(b, j);
        CHECK(std::abs(y(i, j) - std::max(0.0, acc)) < 1e-12);
      }
    }
  }
}

TEST_CASE("property: cbam matches a second implementation") {
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> extent(1, 9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = extent(rng), f = extent(rng);
    CbamBlock cbam(n, f, 4, rng);
    Tensor h = random_tensor({n, f}, rng, -2.0, 2.0, false);
    const Tensor out = cbam.forward(h);
    CHECK(max_abs_diff(out.data(), cbam_ref(cbam, h)) < 1e-12);
  }
}

TEST_CASE("property: attention maps lie in (0, 1) and only shrink magnitudes") {
  Rng rng(4);
  CbamBlock cbam(6, 5, 4, rng);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor h = random_tensor({6, 5}, rng, -3.0, 3.0, false);
    const Tensor node = cbam.node_attention(h), feature = cbam.feature_attention(h);
    CHECK(node.shape() == Shape{6, 1});
    CHECK(feature.shape() == Shape{1, 5});
    for (double v : node.data()) CHECK((v > 0.0 && v < 1.0));
    for (double v : feature.data()) CHECK((v > 0.0 && v < 1.0));
    const Tensor out = cbam.forward(h);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      CHECK(std::abs(out[i]) <= std::abs(h[i]));
      CHECK(out[i] * h[i] >= 0.0);
    }
  }
}

TEST_CASE("saturated gates make cbam the identity") {
  Rng rng(5);
  CbamBlock cbam(5, 3, 4, rng);
  open_gates(cbam);
  Tensor h = random_tensor({5, 3}, rng, -2.0, 2.0, false);
  CHECK(max_abs_diff(cbam.forward(h).data(), h.data()) == 0.0);
}

TEST_CASE("one identity block returns relu(x) plus x") {
  Rng rng(6);
  MagcnOptions o;
  o.layers = 1;
  MagcnStack stack(4, 3, 3, o, rng);
  copy_into(stack.blocks()[0].gcn.weight, Tensor::identity(3));
  open_gates(stack.blocks()[0].cbam);
  CHECK_FALSE(stack.blocks()[0].adapter.defined());
  Tensor x = random_tensor({4, 3}, rng, -1.0, 1.0, false);
  // A zero adjacency gives L̃ = normalize(I) = I.
  const Tensor out = stack.forward(x, Tensor::zeros({4, 4}));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(out[i] == std::max(0.0, x[i]) + x[i]);

  MagcnStack widening(4, 3, 5, o, rng);
  CHECK(widening.blocks()[0].adapter.shape() == Shape{3, 5});
  CHECK(widening.forward(x, Tensor::zeros({4, 4})).shape() == Shape{4, 5});
}

TEST_CASE("property: open gates without residuals reduce the stack to plain gcn") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    MagcnOptions o;
    o.residual = false;
    MagcnStack stack(5, 4, 6, o, rng);
    for (auto& block : stack.blocks()) open_gates(block.cbam);
    Tensor x = random_tensor({5, 4}, rng, -1.0, 1.0, false), a = random_adjacency(5, rng);
    const Tensor l = propagation_matrix(a);
    Tensor h = x;
    for (const auto& block : stack.blocks()) h = block.gcn.forward(h, l);
    CHECK(max_abs_diff(stack.forward(x, a).data(), h.data()) < 1e-14);
  }
}

TEST_CASE("propagation matrix adds self loops before normalizing") {
  const Tensor l = propagation_matrix(Tensor::filled({2, 2}, 1.0));
  // A + I = [[2,1],[1,2]], degrees 3.
  CHECK(l(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(l(0, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("removing residuals keeps shapes but changes outputs") {
  Rng rng(8);
  MagcnOptions with, without;
  without.residual = false;
  Rng a_rng(9), b_rng(9);
  MagcnStack full(6, 5, 8, with, a_rng), bare(6, 5, 8, without, b_rng);
  Tensor x = random_tensor({6, 5}, rng, -1.0, 1.0, false), a = random_adjacency(6, rng);
  const Tensor y_full = full.forward(x, a), y_bare = bare.forward(x, a);
  CHECK(y_full.shape() == y_bare.shape());
  CHECK(max_abs_diff(y_full.data(), y_bare.data()) > 1e-6);
  ParameterList p_full, p_bare;
  full.collect(p_full, "m");
  bare.collect(p_bare, "m");
  CHECK(p_bare.size() < p_full.size());
}

TEST_CASE("full-size stack maps 62 x 5 to 62 x 50") {
  Rng rng(10);
  MagcnStack stack(62, 5, 50, MagcnOptions{}, rng);
  Tensor x = random_tensor({62, 5}, rng, -1.0, 1.0, false);
  CHECK(stack.forward(x, random_adjacency(62, rng)).shape() == Shape{62, 50});
  CHECK_THROWS_AS(stack.forward(Tensor::zeros({61, 5}), random_adjacency(61, rng)), ShapeError);
  CHECK_THROWS_AS(stack.forward(x, Tensor::zeros({62, 61})), ShapeError);
  CHECK_THROWS_AS(MagcnStack(4, 2, 2, MagcnOptions{0}, rng), std::invalid_argument);
}

TEST_CASE("stack gradients match finite differences") {
  Rng rng(11);
  MagcnStack stack(5, 3, 4, MagcnOptions{}, rng);
  Tensor x = random_tensor({5, 3}, rng);
  Tensor a = random_tensor({5, 5}, rng, 0.2, 1.0);
  ParameterList leaves{{"x", x}, {"a", a}};
  stack.collect(leaves, "magcn");
  const auto report = testing::check_gradients([&] { return testing::weighted_sum(stack.forward(x, a)); }, leaves);
  INFO(report.worst);
  CHECK(report.checked > 0);
  CHECK(report.max_rel < 1e-4);
}

TEST_CASE("every stack parameter receives gradient at full size") {
  Rng rng(12);
  MagcnStack stack(62, 5, 50, MagcnOptions{}, rng);
  ParameterList params;
  stack.collect(params, "magcn");
  zero_grads(params);
  for (int sample = 0; sample < 4; ++sample) {
    Tensor x = random_tensor({62, 5}, rng, -1.0, 1.0, false);
    Tape tape;
    TapeGuard guard(tape);
    tape.backward(testing::weighted_sum(stack.forward(x, random_adjacency(62, rng)), 20 + sample));
  }
  for (const auto& p : params) {
    double norm = 0.0;
    for (double g : p.tensor.grad()) norm += g * g;
    INFO(p.name);
    CHECK(norm > 0.0);
  }
}

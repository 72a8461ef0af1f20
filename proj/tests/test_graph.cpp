#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mindeeg/errors.hpp"
#include "mindeeg/graph.hpp"
#include "support.hpp"

using namespace mindeeg;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

using Dense = std::vector<std::vector<double>>;

Dense to_dense(const Tensor& t) {
  Dense out(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out[r][c] = t(r, c);
  return out;
}

Dense dense_matmul(const Dense& a, const Dense& b) {
  Dense out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

// D^(-1/2)·A·D^(-1/2) built from explicit diagonal matrices.
Dense dense_normalize(const Dense& a) {
  const std::size_t n = a.size();
  Dense d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (double v : a[i]) deg += v;
    d[i][i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  return dense_matmul(dense_matmul(d, a), d);
}

double max_diff(const Tensor& t, const Dense& expect) {
  double m = 0.0;
  for (std::size_t r = 0; r < expect.size(); ++r)
    for (std::size_t c = 0; c < expect[r].size(); ++c) m = std::max(m, std::abs(t(r, c) - expect[r][c]));
  return m;
}

Tensor random_nonneg(std::size_t n, Rng& rng) { return random_tensor({n, n}, rng, 0.0, 2.0, false); }

Tensor random_symmetric(std::size_t n, Rng& rng) {
  Tensor a = random_nonneg(n, rng);
  NoGradGuard no_grad;
  return add(a, transpose(a));
}

void fill(Tensor t, double value) {
  for (auto& v : t.mutable_data()) v = value;
}

BandGraphs stack_bands(const std::vector<Tensor>& bands) {
  std::vector<Tensor> rows;
  for (const auto& b : bands) rows.push_back(reshape(b, {1, b.numel()}));
  return BandGraphs{bands[0].rows(), concat(rows, 0)};
}

}  // namespace

TEST_CASE("adaptive graph encoder matches a straight-line evaluation") {
  Rng rng(3);
  const std::size_t n = 3, d = 2;
  for (double shift : {0.0, 1.0}) {
    AdaptiveGraphEncoder age(n, d, rng, shift);
    Tensor x = random_tensor({n, d}, rng, -2.0, 2.0, false);
    const Dense m = to_dense(age.spatial), b = to_dense(age.bias), mix = to_dense(age.band_mix),
                p = to_dense(age.projection), xd = to_dense(x);
    Dense h = dense_matmul(m, xd);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) h[i][j] += b[i][j];
    const Dense y = dense_matmul(dense_matmul(h, mix), p);

    const BandGraphs g = age.encode(x);
    REQUIRE(g.bands() == d);
    for (std::size_t band = 0; band < d; ++band) {
      const Tensor a = g.band(band);
      REQUIRE(a.shape() == Shape{n, n});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double pre = y[i][band * n + j];
          const double expect = (pre > 0.0 ? pre : std::expm1(pre)) + shift;
          CHECK(std::abs(a(i, j) - expect) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("zero spatial matrix and bias give a constant adjacency") {
  Rng rng(4);
  Tensor x = random_tensor({4, 3}, rng, -1.0, 1.0, false);
  AdaptiveGraphEncoder unshifted(4, 3, rng, 0.0);
  fill(unshifted.spatial, 0.0);
  fill(unshifted.bias, 0.0);
  const BandGraphs zero = unshifted.encode(x);
  for (double v : zero.stacked.data()) CHECK(v == 0.0);

  AdaptiveGraphEncoder shifted(4, 3, rng);
  fill(shifted.spatial, 0.0);
  fill(shifted.bias, 0.0);
  const BandGraphs one = shifted.encode(x);
  for (double v : one.stacked.data()) CHECK(v == 1.0);
}

TEST_CASE("encoder output is strictly positive with the default shift") {
  Rng rng(5);
  AdaptiveGraphEncoder age(6, 5, rng);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({6, 5}, rng, -10.0, 10.0, false);
    const BandGraphs g = age.encode(x);
    for (double v : g.stacked.data()) CHECK(v > 0.0);
  }
}

TEST_CASE("full-size encoder yields five 62 x 62 graphs") {
  Rng rng(6);
  AdaptiveGraphEncoder age(62, 5, rng);
  Tensor x = random_tensor({62, 5}, rng, -1.0, 1.0, false);
  const BandGraphs g = age.encode(x);
  CHECK(g.stacked.shape() == Shape{5, 62 * 62});
  for (std::size_t b = 0; b < 5; ++b) CHECK(g.band(b).shape() == Shape{62, 62});
  CHECK_THROWS_AS(age.encode(Tensor::zeros({62, 4})), ShapeError);
  CHECK_THROWS_AS(age.encode(Tensor::zeros({61, 5})), ShapeError);
}

TEST_CASE("encoder gradients match finite differences") {
  Rng rng(7);
  AdaptiveGraphEncoder age(4, 3, rng);
  Tensor x = random_tensor({4, 3}, rng);
  ParameterList leaves{{"x", x}};
  age.collect(leaves, "age");
  const auto report = testing::check_gradients(
      [&] { return testing::weighted_sum(normalize_adjacency(age.encode(x).band(1))); }, leaves);
  INFO(report.worst);
  CHECK(report.max_rel < 1e-4);
}

TEST_CASE("normalize_adjacency examples") {
  const Tensor eye = normalize_adjacency(Tensor::identity(3));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(eye(i, j) == (i == j ? 1.0 : 0.0));

  const Tensor ones = normalize_adjacency(Tensor::filled({2, 2}, 1.0));
  for (double v : ones.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(normalize_adjacency(Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("normalize_adjacency zeroes isolated nodes") {
  Tensor a = Tensor::matrix({{0, 0, 0}, {0, 2, 1}, {0, 1, 2}});
  const Tensor n = normalize_adjacency(a);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(n(0, k) == 0.0);
    CHECK(n(k, 0) == 0.0);
  }
  for (double v : n.data()) CHECK(std::isfinite(v));
  CHECK(n(1, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("property: normalize_adjacency agrees with a dense oracle") {
  Rng rng(8);
  std::uniform_int_distribution<std::size_t> order(1, 9);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor a = random_nonneg(order(rng), rng);
    CHECK(max_diff(normalize_adjacency(a), dense_normalize(to_dense(a))) < 1e-12);
  }
}

TEST_CASE("property: normalize_adjacency is scale invariant") {
  Rng rng(9);
  std::uniform_real_distribution<double> scale_dist(1e-3, 1e3);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor a = random_nonneg(5, rng);
    const double c = scale_dist(rng);
    CHECK(max_abs_diff(normalize_adjacency(scale(a, c)).data(), normalize_adjacency(a).data()) < 1e-12);
  }
}

TEST_CASE("property: normalize_adjacency preserves symmetry") {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor n = normalize_adjacency(random_symmetric(6, rng));
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(n(i, j) - n(j, i)) < 1e-15);
  }
}

TEST_CASE("property: excitation weights lie in (0, 1) and depend only on band means") {
  Rng rng(11);
  SqueezeExcitation se(5, 2, rng);
  CHECK(se.squeeze.weight.shape() == Shape{5, 2});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> bands, shuffled;
    for (int b = 0; b < 5; ++b) {
      Tensor a = random_nonneg(4, rng);
      bands.push_back(a);
      // Reversing the entries keeps the band mean.
      std::vector<double> rev(a.data().rbegin(), a.data().rend());
      shuffled.emplace_back(Shape{4, 4}, std::move(rev));
    }
    const Tensor w = se.excitation(stack_bands(bands));
    REQUIRE(w.shape() == Shape{1, 5});
    for (double v : w.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    CHECK(max_abs_diff(w.data(), se.excitation(stack_bands(shuffled)).data()) < 1e-12);
  }
}

TEST_CASE("single band fusion keeps a symmetric graph symmetric") {
  Rng rng(12);
  SqueezeExcitation se(1, 2, rng);
  const Tensor a = random_symmetric(5, rng);
  const Tensor fused = se.fuse(stack_bands({a}));
  CHECK(max_abs_diff(fused.data(), normalize_adjacency(a).data()) < 1e-12);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(fused(i, j) == doctest::Approx(fused(j, i)).epsilon(1e-14));
}

TEST_CASE("identical bands fuse to the normalized band") {
  Rng rng(13);
  SqueezeExcitation se(5, 2, rng);
  const Tensor a = random_nonneg(6, rng);
  const Tensor fused = se.fuse(stack_bands({a, a, a, a, a}));
  CHECK(max_abs_diff(fused.data(), normalize_adjacency(a).data()) < 1e-12);
}

TEST_CASE("saturated excitation selects the first band") {
  Rng rng(14);
  SqueezeExcitation se(5, 2, rng);
  fill(se.squeeze.weight, 0.0);
  fill(se.expand.weight, 0.0);
  auto bias = se.expand.bias.mutable_data();
  for (std::size_t b = 0; b < 5; ++b) bias[b] = b == 0 ? 40.0 : -40.0;
  std::vector<Tensor> bands;
  for (int b = 0; b < 5; ++b) bands.push_back(random_nonneg(6, rng));
  const Tensor fused = se.fuse(stack_bands(bands));
  CHECK(max_abs_diff(fused.data(), normalize_adjacency(bands[0]).data()) < 1e-12);
}

TEST_CASE("squeeze-excitation gradients match finite differences") {
  Rng rng(15);
  SqueezeExcitation se(3, 2, rng);
  std::vector<Tensor> bands;
  for (int b = 0; b < 3; ++b) bands.push_back(random_tensor({4, 4}, rng, 0.5, 2.0));
  ParameterList leaves;
  se.collect(leaves, "se");
  for (std::size_t b = 0; b < bands.size(); ++b) leaves.push_back({"band" + std::to_string(b), bands[b]});
  const auto report =
      testing::check_gradients([&] { return testing::weighted_sum(se.fuse(stack_bands(bands))); }, leaves);
  INFO(report.worst);
  CHECK(report.max_rel < 1e-4);
}

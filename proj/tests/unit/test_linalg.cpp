#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "memotr/linalg.hpp"

using namespace memotr;
using testing::max_abs_diff;
using testing::uniform;

namespace {

Tensor2 naive_matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_CASE("matmul examples") {
  const Tensor2 a = Tensor2::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(a, Tensor2::from_rows({{0}, {1}})) == Tensor2::from_rows({{2}, {4}}));
  Rng rng(1);
  const Tensor2 m = uniform(rng, 3, 5);
  CHECK(matmul(Tensor2::identity(3), m) == m);
  CHECK_THROWS_AS(matmul(a, Tensor2(3, 1)), ShapeError);
}

TEST_CASE("matmul against triple loop") {
  Rng rng(2);
  for (int c = 0; c < 20; ++c) {
    const Tensor2 a = uniform(rng, 8, 8);
    const Tensor2 b = uniform(rng, 8, 8);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul associativity") {
  Rng rng(3);
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 1 + rng.below(6), k = 1 + rng.below(6), m = 1 + rng.below(6), p = 1 + rng.below(6);
    const Tensor2 a = uniform(rng, n, k), b = uniform(rng, k, m), d = uniform(rng, m, p);
    CHECK(max_abs_diff(matmul(matmul(a, b), d), matmul(a, matmul(b, d))) < 1e-9);
  }
}

TEST_CASE("softmax examples") {
  const Tensor2 s = softmax_rows(Tensor2::from_rows({{0, 0, 0}}));
  for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Tensor2 big = softmax_rows(Tensor2::from_rows({{5.0, 1005.0}}));
  CHECK(big.all_finite());
  CHECK(big(0, 0) < 1e-300);
  CHECK(big(0, 1) == doctest::Approx(1.0));

  Rng rng(4);
  for (int c = 0; c < 50; ++c) {
    const Tensor2 row = uniform(rng, 1, 7, -20.0, 20.0);
    double mx = row(0, 0);
    for (double v : row.values()) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : row.values()) z += std::exp(v - mx);
    const Tensor2 got = softmax_rows(row);
    for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(got(0, j) - std::exp(row(0, j) - mx) / z) < 1e-12);
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(5);
  for (int c = 0; c < 200; ++c) {
    const double spread = std::pow(10.0, rng.uniform(-3.0, 3.0));
    const Tensor2 s = softmax_rows(uniform(rng, 1 + rng.below(5), 1 + rng.below(20), -spread, spread));
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double total = 0.0;
      for (double v : s.row(r)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(Tensor2(1, 1, 0.0))(0, 0) == 0.5);
  CHECK(std::abs(sigmoid(Tensor2(1, 1, 30.0))(0, 0) - 1.0) < 1e-9);
  CHECK(std::abs(sigmoid(Tensor2(1, 1, -30.0))(0, 0)) < 1e-9);
  Rng rng(6);
  const Tensor2 x = uniform(rng, 4, 9, -10.0, 10.0);
  const Tensor2 s = sigmoid(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(s.values()[i] - 1.0 / (1.0 + std::exp(-x.values()[i]))) < 1e-15);
    CHECK(s.values()[i] > 0.0);
    CHECK(s.values()[i] < 1.0);
  }
}

TEST_CASE("grad_check of sum of squares") {
  Rng rng(7);
  const Tensor2 x = uniform(rng, 3, 4, 0.5, 2.0);
  CHECK(grad_check([](Tape&, const Var& v) { return sum(mul(v, v)); }, x, 1e-5) < 1e-8);
}

TEST_CASE("grad_check of sigmoid over matmul") {
  Rng rng(8);
  const Tensor2 inputs[] = {uniform(rng, 3, 4), uniform(rng, 4, 2)};
  const TapedFunction f = [](Tape&, std::span<const Var> in) { return sum(sigmoid(matmul(in[0], in[1]))); };
  CHECK(grad_check(f, inputs, 1e-5) < 1e-6);
}

TEST_CASE("grad_check per op") {
  Rng rng(9);
  const Tensor2 a = uniform(rng, 3, 4), b = uniform(rng, 3, 4), sq = uniform(rng, 4, 3);
  const Tensor2 weights = uniform(rng, 3, 4, 0.5, 1.5);
  const Tensor2 ab[] = {a, b};
  const Tensor2 a_sq[] = {a, sq};
  // A fixed positive weighting keeps every component of the gradient away from zero.
  auto loss = [&](Tape& tape, const Var& v) { return sum(mul(v, tape.constant(weights))); };

  SUBCASE("add") {
    CHECK(grad_check([&](Tape& t, std::span<const Var> in) { return loss(t, add(in[0], in[1])); }, ab, 1e-5) < 1e-6);
  }
  SUBCASE("sub") {
    CHECK(grad_check([&](Tape& t, std::span<const Var> in) { return loss(t, sub(in[0], in[1])); }, ab, 1e-5) < 1e-6);
  }
  SUBCASE("mul") {
    const Tensor2 pos[] = {uniform(rng, 3, 4, 0.5, 2.0), uniform(rng, 3, 4, 0.5, 2.0)};
    CHECK(grad_check([&](Tape& t, std::span<const Var> in) { return loss(t, mul(in[0], in[1])); }, pos, 1e-5) < 1e-6);
  }
  SUBCASE("scale") {
    CHECK(grad_check([&](Tape& t, const Var& v) { return loss(t, scale(v, -2.5)); }, a, 1e-5) < 1e-6);
  }
  SUBCASE("matmul") {
    const Tensor2 pos[] = {uniform(rng, 3, 4, 0.5, 2.0), uniform(rng, 4, 3, 0.5, 2.0)};
    CHECK(grad_check([](Tape&, std::span<const Var> in) { return sum(matmul(in[0], in[1])); }, pos, 1e-5) < 1e-6);
  }
  SUBCASE("transpose") {
    CHECK(grad_check([&](Tape& t, const Var& v) { return loss(t, transpose(v)); }, sq, 1e-5) < 1e-6);
  }
  SUBCASE("sigmoid") {
    CHECK(grad_check([&](Tape& t, const Var& v) { return loss(t, sigmoid(v)); }, a, 1e-5) < 1e-6);
  }
  SUBCASE("relu away from the kink") {
    const Tensor2 pos = uniform(rng, 3, 4, 0.2, 2.0);
    CHECK(grad_check([&](Tape& t, const Var& v) { return loss(t, relu(v)); }, pos, 1e-5) < 1e-6);
  }
  SUBCASE("softmax") {
    CHECK(grad_check([&](Tape& t, const Var& v) { return loss(t, softmax_rows(v)); }, a, 1e-5) < 1e-6);
  }
  SUBCASE("concat and slice") {
    const TapedFunction f = [&](Tape& t, std::span<const Var> in) {
      const Var both[] = {in[0], transpose(in[1])};
      const Var joined = concat_cols(both);
      const Var stacked[] = {slice_cols(joined, 0, 4), slice_cols(joined, 4, 4)};
      return add(loss(t, slice_rows(concat_rows(stacked), 0, 3)), loss(t, slice_rows(concat_rows(stacked), 3, 3)));
    };
    CHECK(grad_check(f, a_sq, 1e-5) < 1e-6);
  }
  SUBCASE("mean") {
    CHECK(grad_check([](Tape&, const Var& v) { return sum(mean_rows(v)); }, a, 1e-5) < 1e-6);
  }
}

TEST_CASE("grad_check catches a wrong gradient") {
  // Backward doubles the true gradient.
  const auto f = [](Tape& tape, const Var& v) {
    const Var out = tape.record(sum(v.value()), [v](Tape& t, const Tensor2& adj) {
      t.accumulate(v.index(), Tensor2(v.rows(), v.cols(), 2.0 * adj(0, 0)));
    });
    return out;
  };
  CHECK(grad_check(f, Tensor2(2, 2, 1.0), 1e-5) > 0.4);
}

TEST_CASE("grad_report normwise measure") {
  Rng rng(10);
  const Tensor2 x = uniform(rng, 3, 3);
  const GradReport r = grad_report([](Tape&, std::span<const Var> in) { return sum(sigmoid(in[0])); },
                                   std::span<const Tensor2>(&x, 1), 1e-5);
  CHECK(r.normwise < 1e-8);
  CHECK(r.entrywise < 1e-6);
}

TEST_CASE("grad_check rejects non-finite values") {
  const auto f = [](Tape&, const Var& v) { return sum(scale(v, 1e308)); };
  CHECK_THROWS_AS(grad_check(f, Tensor2(2, 2, 10.0), 1e-5), NumericError);
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(add(Tensor2(2, 2), Tensor2(2, 3)), ShapeError);
  CHECK_THROWS_AS(mul(Tensor2(1, 2), Tensor2(2, 1)), ShapeError);
  CHECK_THROWS_AS(slice_cols(Tensor2(2, 2), 1, 2), ShapeError);
  CHECK_THROWS_AS(Tensor2(2, 2, std::vector<double>{1.0}), ShapeError);
}

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "memotr/attention.hpp"

using namespace memotr;
using testing::max_abs_diff;
using testing::uniform;

namespace {

AttentionParams random_attention(Rng& rng, std::size_t d, std::size_t heads) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  return {rng.normal_tensor(d, d, s), rng.normal_tensor(d, d, s), rng.normal_tensor(d, d, s),
          rng.normal_tensor(d, d, s), heads};
}

MlpParams random_mlp(Rng& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  return {rng.normal_tensor(in, hidden, 0.5), rng.normal_tensor(1, hidden, 0.5), rng.normal_tensor(hidden, out, 0.5),
          rng.normal_tensor(1, out, 0.5)};
}

Tensor2 permute_rows(const Tensor2& t, const std::vector<std::size_t>& perm) {
  Tensor2 out(t.rows(), t.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) out(i, j) = t(perm[i], j);
  return out;
}

}  // namespace

TEST_CASE("identical keys give the mean of v") {
  Rng rng(11);
  const Tensor2 row = uniform(rng, 1, 8);
  Tensor2 k(5, 8);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) k(r, c) = row(0, c);
  const Tensor2 v = uniform(rng, 5, 8);
  const Tensor2 out = mha(uniform(rng, 3, 8), k, v, identity_attention(8, 2));
  const Tensor2 mean = mean_rows(v);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(out(r, c) - mean(0, c)) < 1e-12);
}

TEST_CASE("single key passes its value through") {
  Rng rng(12);
  const Tensor2 v = uniform(rng, 1, 8);
  const Tensor2 out = mha(uniform(rng, 4, 8), uniform(rng, 1, 8), v, identity_attention(8, 4));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(out(r, c) == v(0, c));
}

TEST_CASE("one head against the direct formula") {
  Rng rng(13);
  const std::size_t d = 6;
  const Tensor2 q = uniform(rng, 3, d), k = uniform(rng, 5, d), v = uniform(rng, 5, d);
  const Tensor2 got = mha(q, k, v, identity_attention(d, 1));
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> logits(5);
    for (std::size_t j = 0; j < 5; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += q(i, c) * k(j, c);
      logits[j] = dot / std::sqrt(static_cast<double>(d));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (std::size_t c = 0; c < d; ++c) {
      double want = 0.0;
      for (std::size_t j = 0; j < 5; ++j) want += logits[j] / z * v(j, c);
      CHECK(std::abs(got(i, c) - want) < 1e-12);
    }
  }
}

TEST_CASE("empty key set gives zeros") {
  const Tensor2 out = mha(Tensor2(3, 4, 1.0), Tensor2(0, 4), Tensor2(0, 4), identity_attention(4, 2));
  CHECK(out == Tensor2(3, 4));
}

TEST_CASE("mha shape errors") {
  CHECK_THROWS_AS(mha(Tensor2(1, 4), Tensor2(2, 4), Tensor2(3, 4), identity_attention(4, 1)), ShapeError);
  CHECK_THROWS_AS(mha(Tensor2(1, 3), Tensor2(2, 4), Tensor2(2, 4), identity_attention(4, 1)), ShapeError);
  CHECK_THROWS_AS(identity_attention(6, 4), ShapeError);
}

TEST_CASE("key/value permutation leaves mha unchanged") {
  Rng rng(14);
  for (int c = 0; c < 20; ++c) {
    const AttentionParams p = random_attention(rng, 8, 4);
    const Tensor2 q = uniform(rng, 3, 8), k = uniform(rng, 6, 8), v = uniform(rng, 6, 8);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 5; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    CHECK(max_abs_diff(mha(q, k, v, p), mha(q, permute_rows(k, perm), permute_rows(v, perm), p)) < 1e-12);
  }
}

TEST_CASE("outputs stay inside the value hull") {
  Rng rng(15);
  for (int c = 0; c < 20; ++c) {
    AttentionParams p = random_attention(rng, 8, 2);
    p.wv = Tensor2::identity(8);
    p.wo = Tensor2::identity(8);
    const Tensor2 v = uniform(rng, 5, 8, -3.0, 3.0);
    const Tensor2 out = mha(uniform(rng, 4, 8), uniform(rng, 5, 8), v, p);
    for (std::size_t col = 0; col < 8; ++col) {
      double lo = v(0, col), hi = v(0, col);
      for (std::size_t r = 1; r < 5; ++r) lo = std::min(lo, v(r, col)), hi = std::max(hi, v(r, col));
      for (std::size_t r = 0; r < 4; ++r) {
        CHECK(out(r, col) >= lo - 1e-12);
        CHECK(out(r, col) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("mlp2 examples") {
  Rng rng(16);
  const Tensor2 x = uniform(rng, 3, 4);
  CHECK(mlp2(x, zero_mlp(4, 6, 2), Activation::relu) == Tensor2(3, 2));
  const MlpParams id{Tensor2::identity(4), Tensor2(1, 4), Tensor2::identity(4), Tensor2(1, 4)};
  CHECK(mlp2(x, id, Activation::none) == x);
  CHECK_THROWS_AS(mlp2(Tensor2(1, 3), id, Activation::none), ShapeError);
}

TEST_CASE("mlp2 against hand composition") {
  Rng rng(17);
  const MlpParams p = random_mlp(rng, 4, 7, 3);
  const Tensor2 x = uniform(rng, 5, 4);
  const Tensor2 got = mlp2(x, p, Activation::relu);
  for (std::size_t r = 0; r < 5; ++r) {
    std::vector<double> h(7);
    for (std::size_t j = 0; j < 7; ++j) {
      double s = p.b1(0, j);
      for (std::size_t i = 0; i < 4; ++i) s += x(r, i) * p.w1(i, j);
      h[j] = std::max(0.0, s);
    }
    for (std::size_t o = 0; o < 3; ++o) {
      double s = p.b2(0, o);
      for (std::size_t j = 0; j < 7; ++j) s += h[j] * p.w2(j, o);
      CHECK(std::abs(got(r, o) - s) < 1e-12);
    }
  }
}

TEST_CASE("mha gradient") {
  Rng rng(18);
  const Tensor2 weights = uniform(rng, 3, 8, 0.5, 1.5);
  const AttentionParams p = random_attention(rng, 8, 2);
  const Tensor2 inputs[] = {uniform(rng, 3, 8), uniform(rng, 4, 8), uniform(rng, 4, 8), p.wq, p.wk, p.wv, p.wo};
  const TapedFunction f = [&](Tape& tape, std::span<const Var> in) {
    const AttentionParamsT<Var> pv{in[3], in[4], in[5], in[6], 2};
    return sum(mul(mha(in[0], in[1], in[2], pv), tape.constant(weights)));
  };
  const GradReport r = grad_report(f, inputs, 1e-5);
  CHECK(r.entrywise < 1e-6);
  CHECK(r.normwise < 1e-8);
}

TEST_CASE("mlp2 gradient") {
  Rng rng(19);
  const MlpParams p = random_mlp(rng, 4, 6, 3);
  const Tensor2 weights = uniform(rng, 5, 3, 0.5, 1.5);
  const Tensor2 inputs[] = {uniform(rng, 5, 4), p.w1, p.b1, p.w2, p.b2};
  const TapedFunction f = [&](Tape& tape, std::span<const Var> in) {
    const MlpParamsT<Var> pv{in[1], in[2], in[3], in[4]};
    return sum(mul(mlp2(in[0], pv, Activation::none), tape.constant(weights)));
  };
  CHECK(grad_check(f, inputs, 1e-5) < 1e-6);
}

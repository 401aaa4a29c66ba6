#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "memotr/model.hpp"
#include "memotr/tim.hpp"

using namespace memotr;
using testing::max_abs_diff;
using testing::uniform;

namespace {

// Reference built from plain loops, independent of the Tensor2 op set.
struct Ref {
  using M = std::vector<std::vector<double>>;

  static M of(const Tensor2& t) {
    M m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
    return m;
  }

  static M dense(const M& x, const Tensor2& w, const Tensor2* b) {
    M out(x.size(), std::vector<double>(w.cols()));
    for (std::size_t r = 0; r < x.size(); ++r)
      for (std::size_t j = 0; j < w.cols(); ++j) {
        double s = b ? (*b)(0, j) : 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) s += x[r][i] * w(i, j);
        out[r][j] = s;
      }
    return out;
  }

  static M mlp(const M& x, const MlpParams& p) {
    M h = dense(x, p.w1, &p.b1);
    for (auto& row : h)
      for (double& v : row) v = std::max(0.0, v);
    return dense(h, p.w2, &p.b2);
  }

  static M attend(const M& q, const M& k, const M& v, const AttentionParams& p) {
    const M qp = dense(q, p.wq, nullptr), kp = dense(k, p.wk, nullptr), vp = dense(v, p.wv, nullptr);
    const std::size_t d = p.wq.rows(), dh = d / p.heads;
    M joined(q.size(), std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < p.heads; ++h)
      for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<double> w(k.size());
        double mx = -INFINITY;
        for (std::size_t j = 0; j < k.size(); ++j) {
          double s = 0.0;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) s += qp[i][c] * kp[j][c];
          w[j] = s / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, w[j]);
        }
        double z = 0.0;
        for (double& x : w) z += (x = std::exp(x - mx));
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c)
          for (std::size_t j = 0; j < k.size(); ++j) joined[i][c] += w[j] / z * vp[j][c];
      }
    return dense(joined, p.wo, nullptr);
  }

  static M plus(const M& a, const M& b) {
    M out = a;
    for (std::size_t r = 0; r < a.size(); ++r)
      for (std::size_t c = 0; c < a[r].size(); ++c) out[r][c] += b[r][c];
    return out;
  }

  static M forward(const Tensor2& o, const Tensor2& prev, const Tensor2& mem, const TimParams& p, TimVariant variant) {
    const M O = of(o), P = of(prev), Mm = of(mem);
    M w = mlp(O, p.weight_mlp);
    M cat(O.size());
    for (std::size_t r = 0; r < O.size(); ++r) {
      for (std::size_t c = 0; c < O[r].size(); ++c) cat[r].push_back(O[r][c] / (1.0 + std::exp(-w[r][c])));
      cat[r].insert(cat[r].end(), P[r].begin(), P[r].end());
    }
    const M agg = mlp(cat, p.fuse_mlp);
    switch (variant) {
      case TimVariant::full: return mlp(plus(Mm, attend(agg, Mm, O, p.attn)), p.ffn);
      case TimVariant::memory_off: return mlp(attend(agg, agg, O, p.attn), p.ffn);
      case TimVariant::attn_off: return mlp(plus(Mm, agg), p.ffn);
      case TimVariant::naive: return mlp(O, p.ffn);
    }
    return {};
  }
};

Tensor2 permute_rows(const Tensor2& t, const std::vector<std::size_t>& perm) {
  Tensor2 out(t.rows(), t.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) out(i, j) = t(perm[i], j);
  return out;
}

}  // namespace

TEST_CASE("adaptive weight") {
  Rng rng(30);
  TimParams p = random_tim(8, 2, 1);
  const Tensor2 o = uniform(rng, 3, 8);
  const Tensor2 w = adaptive_weight(o, p);
  const Ref::M logits = Ref::mlp(Ref::of(o), p.weight_mlp);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(std::abs(w(r, c) - 1.0 / (1.0 + std::exp(-logits[r][c]))) < 1e-12);
      CHECK(w(r, c) > 0.0);
      CHECK(w(r, c) < 1.0);
    }
  p.weight_mlp = zero_mlp(8, 8, 8);
  CHECK(adaptive_weight(o, p) == Tensor2(3, 8, 0.5));
  CHECK(adaptive_weight(Tensor2(0, 8), p).rows() == 0);
}

TEST_CASE("aggregate") {
  Rng rng(31);
  TimParams p = random_tim(8, 2, 2);
  const Tensor2 o = uniform(rng, 3, 8), prev = uniform(rng, 3, 8);
  CHECK_THROWS_AS(aggregate(o, Tensor2(2, 8), p), ShapeError);

  SUBCASE("zero fuse gives zero rows") {
    p.fuse_mlp = zero_mlp(16, 16, 8);
    CHECK(aggregate(o, prev, p) == Tensor2(3, 8));
  }
  SUBCASE("selector picks the previous output") {
    // Split prev into positive and negative parts through relu and recombine.
    Tensor2 w1(16, 16), w2(16, 8);
    for (std::size_t i = 0; i < 8; ++i) {
      w1(8 + i, i) = 1.0;
      w1(8 + i, 8 + i) = -1.0;
      w2(i, i) = 1.0;
      w2(8 + i, i) = -1.0;
    }
    p.fuse_mlp = {w1, Tensor2(1, 16), w2, Tensor2(1, 8)};
    CHECK(max_abs_diff(aggregate(o, prev, p), prev) < 1e-15);
  }
}

TEST_CASE("tim_forward against the loop reference") {
  Rng rng(32);
  for (TimVariant variant : {TimVariant::full, TimVariant::memory_off, TimVariant::attn_off, TimVariant::naive}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const TimParams p = random_tim(16, 4, seed);
      const Tensor2 o = uniform(rng, 4, 16), prev = uniform(rng, 4, 16), mem = uniform(rng, 4, 16);
      const TimOutput out = tim_forward(o, prev, mem, p, TimOptions{variant, 0.01, false});
      const Ref::M want = Ref::forward(o, prev, mem, p, variant);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 16; ++c) CHECK(std::abs(out.embeddings(r, c) - want[r][c]) < 1e-12);
      for (std::size_t i = 0; i < mem.size(); ++i)
        CHECK(std::abs(out.memories.values()[i] - (0.99 * mem.values()[i] + 0.01 * o.values()[i])) < 1e-15);
    }
  }
}

TEST_CASE("single track with identity weights") {
  Rng rng(33);
  TimParams p = random_tim(8, 1, 3);
  p.attn = identity_attention(8, 1);
  // ReLU identity: [x, -x] in the hidden layer, recombined.
  Tensor2 w1(8, 16), w2(16, 8);
  for (std::size_t i = 0; i < 8; ++i) {
    w1(i, i) = 1.0;
    w1(i, 8 + i) = -1.0;
    w2(i, i) = 1.0;
    w2(8 + i, i) = -1.0;
  }
  p.ffn = {w1, Tensor2(1, 16), w2, Tensor2(1, 8)};
  const Tensor2 o = uniform(rng, 1, 8), mem = uniform(rng, 1, 8);
  const TimOutput out = tim_forward(o, uniform(rng, 1, 8), mem, p, TimOptions{});
  CHECK(max_abs_diff(out.embeddings, add(mem, o)) < 1e-15);
}

TEST_CASE("empty batch") {
  const TimParams p = random_tim(8, 2, 4);
  const TimOutput out = tim_forward(Tensor2(0, 8), Tensor2(0, 8), Tensor2(0, 8), p, TimOptions{});
  CHECK(out.embeddings.rows() == 0);
  CHECK(out.memories.rows() == 0);
}

TEST_CASE("tim_forward is equivariant to track order") {
  Rng rng(34);
  const TimParams p = random_tim(16, 4, 5);
  const Tensor2 o = uniform(rng, 5, 16), prev = uniform(rng, 5, 16), mem = uniform(rng, 5, 16);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const TimOutput a = tim_forward(o, prev, mem, p, TimOptions{});
  const TimOutput b = tim_forward(permute_rows(o, perm), permute_rows(prev, perm), permute_rows(mem, perm), p,
                                  TimOptions{});
  CHECK(max_abs_diff(permute_rows(a.embeddings, perm), b.embeddings) < 1e-12);
  CHECK(max_abs_diff(permute_rows(a.memories, perm), b.memories) < 1e-12);
}

TEST_CASE("zero lambda freezes memories") {
  Rng rng(35);
  const Tensor2 mem = uniform(rng, 3, 8);
  const TimOutput out = tim_forward(uniform(rng, 3, 8), uniform(rng, 3, 8), mem, random_tim(8, 2, 6),
                                    TimOptions{TimVariant::full, 0.0, false});
  CHECK(out.memories == mem);
}

TEST_CASE("memory term scales linearly with a linear ffn") {
  Rng rng(36);
  TimParams p = random_tim(8, 2, 7);
  // relu(xA) - relu(-xA) = xA, so this ffn is linear.
  const Tensor2 a = rng.normal_tensor(8, 8, 0.3);
  Tensor2 w1(8, 16), w2(16, 8);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) w1(r, c) = a(r, c), w1(r, 8 + c) = -a(r, c);
  for (std::size_t i = 0; i < 8; ++i) w2(i, i) = 1.0, w2(8 + i, i) = -1.0;
  p.ffn = {w1, Tensor2(1, 16), w2, Tensor2(1, 8)};
  const TimOptions opts{TimVariant::attn_off, 0.01, false};
  const Tensor2 o = uniform(rng, 3, 8), prev = uniform(rng, 3, 8), mem = uniform(rng, 3, 8);
  const Tensor2 base = tim_forward(o, prev, Tensor2(3, 8), p, opts).embeddings;
  const Tensor2 d1 = sub(tim_forward(o, prev, mem, p, opts).embeddings, base);
  const Tensor2 d3 = sub(tim_forward(o, prev, scale(mem, 3.0), p, opts).embeddings, base);
  CHECK(max_abs_diff(d3, scale(d1, 3.0)) < 1e-12);
  CHECK(max_abs_diff(d1, matmul(mem, a)) < 1e-12);
}

TEST_CASE("tim_forward gradient, normwise") {
  // The entrywise bound on this function is tracked by the acceptance run; it
  // breaks down on components near the finite-difference noise floor.
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TimParams params = random_tim(16, 4, seed);
    Rng rng(100 + seed);
    std::vector<Tensor2> inputs{rng.normal_tensor(4, 16, 1.0), rng.normal_tensor(4, 16, 1.0),
                                rng.normal_tensor(4, 16, 1.0)};
    for (MlpParams* m : {&params.weight_mlp, &params.fuse_mlp, &params.ffn})
      inputs.insert(inputs.end(), {m->w1, m->b1, m->w2, m->b2});
    inputs.insert(inputs.end(), {params.attn.wq, params.attn.wk, params.attn.wv, params.attn.wo});
    const TapedFunction f = [](Tape&, std::span<const Var> in) {
      TimParamsT<Var> p;
      p.weight_mlp = {in[3], in[4], in[5], in[6]};
      p.fuse_mlp = {in[7], in[8], in[9], in[10]};
      p.ffn = {in[11], in[12], in[13], in[14]};
      p.attn = {in[15], in[16], in[17], in[18], 4};
      return sum(tim_forward(in[0], in[1], in[2], p, TimOptions{}).embeddings);
    };
    CHECK(grad_report(f, inputs, 1e-5).normwise < 1e-7);
  }
}

TEST_CASE("variant names") {
  for (TimVariant v : {TimVariant::full, TimVariant::memory_off, TimVariant::attn_off, TimVariant::naive})
    CHECK(parse_tim_variant(to_string(v)) == v);
  CHECK(to_string(TimVariant::memory_off) == "memory-off");
  CHECK_THROWS_AS(parse_tim_variant("bogus"), UsageError);
}

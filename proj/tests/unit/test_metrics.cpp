#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "memotr/metrics.hpp"
#include "memotr/oracles.hpp"

using namespace memotr;

namespace {

BoundingBox box_at(double cx, double cy) { return {cx, cy, 0.1, 0.1}; }

// Two targets on parallel horizontal paths, `frames` long.
TrackSequence two_walkers(int frames) {
  TrackSequence seq(frames);
  for (int t = 0; t < frames; ++t) {
    seq[t].push_back({1, box_at(0.1 + 0.01 * t, 0.3)});
    seq[t].push_back({2, box_at(0.1 + 0.01 * t, 0.7)});
  }
  return seq;
}

void check_ranges(const MetricsReport& r) {
  for (double v : {r.hota.hota, r.hota.deta, r.hota.assa, r.id.idf1}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(r.clear.mota <= 1.0);
  for (std::size_t a = 0; a < kAlphaCount; ++a) {
    CHECK(std::abs(r.hota.hota_alpha[a] - std::sqrt(r.hota.deta_alpha[a] * r.hota.assa_alpha[a])) < 1e-12);
  }
}

}  // namespace

TEST_CASE("iou examples") {
  const BoundingBox a{0.5, 0.5, 0.2, 0.2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, BoundingBox{0.9, 0.9, 0.1, 0.1}) == 0.0);
  CHECK(iou(BoundingBox{0.5, 0.5, 1.0, 1.0}, BoundingBox{1.0, 0.5, 1.0, 1.0}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(BoundingBox{0.5, 0.5, 0.0, 0.0}, BoundingBox{0.5, 0.5, 0.0, 0.0}) == 0.0);
}

TEST_CASE("hungarian examples") {
  const Assignment a = hungarian(Tensor2::from_rows({{1, 2}, {2, 1}}));
  CHECK(a.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  CHECK(a.cost == 2.0);

  Tensor2 diag(5, 5, 10.0);
  for (std::size_t i = 0; i < 5; ++i) diag(i, i) = 1.0;
  const Assignment d = hungarian(diag);
  for (const auto& [r, c] : d.pairs) CHECK(r == c);

  CHECK(hungarian(Tensor2(0, 3)).pairs.empty());
  CHECK_THROWS_AS(hungarian(Tensor2::from_rows({{1, NAN}})), NumericError);
}

TEST_CASE("hungarian against enumeration") {
  Rng rng(50);
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 1 + rng.below(7), m = 1 + rng.below(7);
    Tensor2 cost(n, m);
    const bool integral = c % 2 == 0;
    for (double& v : cost.values()) v = integral ? static_cast<double>(rng.below(10)) : rng.uniform(-5.0, 5.0);
    const Assignment a = hungarian(cost);
    CHECK(a.pairs.size() == std::min(n, m));
    double total = 0.0;
    std::vector<bool> used_r(n), used_c(m);
    for (const auto& [r, col] : a.pairs) {
      CHECK_FALSE(used_r[r]);
      CHECK_FALSE(used_c[col]);
      used_r[r] = used_c[col] = true;
      total += cost(r, col);
    }
    CHECK(std::abs(total - a.cost) < 1e-9);
    const double best = oracle::brute_assignment_cost(cost);
    if (integral) {
      CHECK(a.cost == best);
    } else {
      CHECK(std::abs(a.cost - best) < 1e-9);
    }
  }
}

TEST_CASE("hungarian beats sampled permutations") {
  Rng rng(51);
  for (int c = 0; c < 20; ++c) {
    const std::size_t n = 6;
    Tensor2 cost(n, n);
    for (double& v : cost.values()) v = rng.uniform(0.0, 1.0);
    const double best = hungarian(cost).cost;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int s = 0; s < 1000; ++s) {
      for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
      CHECK(best <= total + 1e-12);
    }
  }
}

TEST_CASE("perfect prediction") {
  const TrackSequence gt = two_walkers(10);
  const MetricsReport r = evaluate(gt, gt);
  CHECK(r.hota.hota == 1.0);
  CHECK(r.hota.deta == 1.0);
  CHECK(r.hota.assa == 1.0);
  CHECK(r.clear.mota == 1.0);
  CHECK(r.clear.idsw == 0);
  CHECK(r.id.idf1 == 1.0);
}

TEST_CASE("one false positive over ten gt detections") {
  TrackSequence gt(10);
  for (int t = 0; t < 10; ++t) gt[t].push_back({1, box_at(0.2 + 0.01 * t, 0.5)});
  TrackSequence pred = gt;
  pred[4].push_back({9, box_at(0.8, 0.2)});
  const ClearResult c = clear_mot(gt, pred);
  CHECK(c.fp == 1);
  CHECK(c.mota == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("identity swap at the midpoint") {
  const TrackSequence gt = two_walkers(10);
  TrackSequence pred = gt;
  for (int t = 5; t < 10; ++t)
    for (LabeledBox& b : pred[t]) b.id = 3 - b.id;
  CHECK(clear_mot(gt, pred).idsw == 2);
  CHECK(idf1(gt, pred).idf1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(oracle::brute_clear(gt, pred).idsw == 2);
}

TEST_CASE("empty prediction") {
  const TrackSequence gt = two_walkers(5);
  const MetricsReport r = evaluate(gt, TrackSequence(5));
  CHECK(r.id.idf1 == 0.0);
  CHECK(r.hota.hota == 0.0);
  CHECK(r.clear.fn == 10);
  CHECK(r.clear.mota == 0.0);
  const MetricsReport nothing = evaluate(TrackSequence(3), TrackSequence(3));
  CHECK(nothing.hota.hota == 0.0);
  CHECK(std::isfinite(nothing.clear.mota));
}

TEST_CASE("shuffled identities keep detection perfect") {
  Rng rng(52);
  const TrackSequence gt = two_walkers(20);
  TrackSequence pred = gt;
  for (auto& frame : pred)
    if (rng.below(2)) std::swap(frame[0].id, frame[1].id);
  const HotaResult h = hota(gt, pred);
  CHECK(h.deta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.assa < 1.0);
}

TEST_CASE("metrics against brute-force definitions") {
  Rng rng(53);
  for (int c = 0; c < 100; ++c) {
    const oracle::MetricsCase mc = oracle::random_metrics_case(rng);
    const MetricsReport r = evaluate(mc.gt, mc.pred);
    const HotaResult bh = oracle::brute_hota(mc.gt, mc.pred);
    CHECK(std::abs(r.hota.hota - bh.hota) < 1e-9);
    CHECK(std::abs(r.hota.deta - bh.deta) < 1e-9);
    CHECK(std::abs(r.hota.assa - bh.assa) < 1e-9);
    for (std::size_t a = 0; a < kAlphaCount; ++a) CHECK(std::abs(r.hota.hota_alpha[a] - bh.hota_alpha[a]) < 1e-9);
    const ClearResult bc = oracle::brute_clear(mc.gt, mc.pred);
    CHECK(r.clear.tp == bc.tp);
    CHECK(r.clear.fp == bc.fp);
    CHECK(r.clear.fn == bc.fn);
    CHECK(r.clear.idsw == bc.idsw);
    const IdResult bi = oracle::brute_idf1(mc.gt, mc.pred);
    CHECK(r.id.idtp == bi.idtp);
    CHECK(std::abs(r.id.idf1 - bi.idf1) < 1e-12);
    check_ranges(r);
  }
}

TEST_CASE("dropping a true positive never raises IDF1") {
  // A prediction is an identity true positive when removing it lowers IDTP.
  Rng rng(54);
  int checked = 0;
  for (int c = 0; c < 50; ++c) {
    const oracle::MetricsCase mc = oracle::random_metrics_case(rng);
    const IdResult before = idf1(mc.gt, mc.pred);
    for (std::size_t t = 0; t < mc.pred.size(); t += 3)
      for (std::size_t i = 0; i < mc.pred[t].size(); ++i) {
        TrackSequence pred = mc.pred;
        pred[t].erase(pred[t].begin() + static_cast<std::ptrdiff_t>(i));
        const IdResult after = idf1(mc.gt, pred);
        if (after.idtp >= before.idtp) continue;
        ++checked;
        CHECK(after.idf1 <= before.idf1 + 1e-12);
      }
  }
  CHECK(checked > 50);
}

TEST_CASE("aggregate sums counts") {
  Rng rng(55);
  const oracle::MetricsCase a = oracle::random_metrics_case(rng), b = oracle::random_metrics_case(rng);
  const MetricsReport ra = evaluate(a.gt, a.pred), rb = evaluate(b.gt, b.pred);
  const MetricsReport both[] = {ra, rb};
  const MetricsReport sum = aggregate(both);
  CHECK(sum.clear.tp == ra.clear.tp + rb.clear.tp);
  CHECK(sum.clear.idsw == ra.clear.idsw + rb.clear.idsw);
  CHECK(sum.id.idtp == ra.id.idtp + rb.id.idtp);
  const MetricsReport one[] = {ra};
  CHECK(std::abs(aggregate(one).hota.hota - ra.hota.hota) < 1e-15);
  check_ranges(sum);
}

TEST_CASE("alpha grid") {
  const auto alphas = hota_alphas();
  CHECK(alphas.front() == doctest::Approx(0.05));
  CHECK(alphas.back() == doctest::Approx(0.95));
  for (std::size_t i = 1; i < kAlphaCount; ++i) CHECK(alphas[i] - alphas[i - 1] == doctest::Approx(0.05));
}

#include "memotr/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>

namespace memotr::oracle {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::size_t frame_count(const TrackSequence& a, const TrackSequence& b) { return std::max(a.size(), b.size()); }

FrameBoxes frame_of(const TrackSequence& s, std::size_t t) { return t < s.size() ? s[t] : FrameBoxes{}; }

std::map<int, int> presence(const TrackSequence& s) {
  std::map<int, int> n;
  for (const auto& f : s) {
    for (const auto& b : f) ++n[b.id];
  }
  return n;
}

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

// Calls visit() on every partial matching between rows and columns that uses
// only allowed(i, j) pairs.
void for_each_matching(std::size_t rows, std::size_t cols, const std::function<bool(std::size_t, std::size_t)>& allowed,
                       const std::function<void(const Pairs&)>& visit) {
  Pairs current;
  std::vector<bool> used(cols, false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == rows) {
      visit(current);
      return;
    }
    rec(i + 1);
    for (std::size_t j = 0; j < cols; ++j) {
      if (used[j] || !allowed(i, j)) continue;
      used[j] = true;
      current.emplace_back(i, j);
      rec(i + 1);
      current.pop_back();
      used[j] = false;
    }
  };
  rec(0);
}

}  // namespace

double brute_assignment_cost(const Tensor2& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) return 0.0;
  const bool flip = cost.rows() > cost.cols();
  const std::size_t n = flip ? cost.cols() : cost.rows();
  const std::size_t m = flip ? cost.rows() : cost.cols();
  std::vector<std::size_t> cols(m);
  for (std::size_t j = 0; j < m; ++j) cols[j] = j;
  double best = std::numeric_limits<double>::infinity();
  // Every ordering of the larger side; its first n entries are the image.
  do {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(flip ? cols[i] : i, flip ? i : cols[i]);
    std::sort(pairs.begin(), pairs.end());
    double total = 0.0;
    for (auto [r, c] : pairs) total += cost(r, c);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

HotaResult brute_hota(const TrackSequence& gt, const TrackSequence& pred) {
  const std::size_t frames = frame_count(gt, pred);
  const auto gn = presence(gt);
  const auto pn = presence(pred);

  // Global alignment between every gt id and predicted id.
  std::map<std::pair<int, int>, double> potential;
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameBoxes g = frame_of(gt, t);
    const FrameBoxes p = frame_of(pred, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double s = iou(g[i].box, p[j].box);
        if (s == 0.0) continue;
        double row = 0.0;
        double col = 0.0;
        for (const auto& q : p) row += iou(g[i].box, q.box);
        for (const auto& h : g) col += iou(h.box, p[j].box);
        potential[{g[i].id, p[j].id}] += s / (row + col - s);
      }
    }
  }
  auto alignment = [&](int g, int p) {
    const auto it = potential.find({g, p});
    if (it == potential.end()) return 0.0;
    return it->second / (gn.at(g) + pn.at(p) - it->second);
  };

  HotaCounts counts;
  const auto alphas = hota_alphas();
  for (std::size_t k = 0; k < kAlphaCount; ++k) {
    std::map<std::pair<int, int>, int> matched;
    double tp = 0.0;
    double fn = 0.0;
    double fp = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      const FrameBoxes g = frame_of(gt, t);
      const FrameBoxes p = frame_of(pred, t);
      Pairs best;
      double best_score = -1.0;
      for_each_matching(
          g.size(), p.size(), [&](std::size_t i, std::size_t j) { return iou(g[i].box, p[j].box) >= alphas[k] - kEps; },
          [&](const Pairs& m) {
            double score = 0.0;
            for (auto [i, j] : m) score += alignment(g[i].id, p[j].id) * iou(g[i].box, p[j].box);
            if (m.size() > best.size() || (m.size() == best.size() && score > best_score)) {
              best = m;
              best_score = score;
            }
          });
      for (auto [i, j] : best) ++matched[{g[i].id, p[j].id}];
      tp += static_cast<double>(best.size());
      fn += static_cast<double>(g.size() - best.size());
      fp += static_cast<double>(p.size() - best.size());
    }
    // One term per true positive: TPA / (TPA + FNA + FPA) of its pair.
    double assa_sum = 0.0;
    for (const auto& [key, m] : matched) {
      const double tpa = m;
      const double fna = gn.at(key.first) - m;
      const double fpa = pn.at(key.second) - m;
      for (int c = 0; c < m; ++c) assa_sum += tpa / (tpa + fna + fpa);
    }
    counts.tp[k] = tp;
    counts.fn[k] = fn;
    counts.fp[k] = fp;
    counts.assa_sum[k] = assa_sum;
  }

  HotaResult r;
  r.counts = counts;
  for (std::size_t k = 0; k < kAlphaCount; ++k) {
    const double det_denom = counts.tp[k] + counts.fn[k] + counts.fp[k];
    r.deta_alpha[k] = det_denom > 0.0 ? counts.tp[k] / det_denom : 0.0;
    r.assa_alpha[k] = counts.tp[k] > 0.0 ? counts.assa_sum[k] / counts.tp[k] : 0.0;
    r.hota_alpha[k] = std::sqrt(r.deta_alpha[k] * r.assa_alpha[k]);
  }
  for (std::size_t k = 0; k < kAlphaCount; ++k) {
    r.hota += r.hota_alpha[k] / kAlphaCount;
    r.deta += r.deta_alpha[k] / kAlphaCount;
    r.assa += r.assa_alpha[k] / kAlphaCount;
  }
  return r;
}

ClearResult brute_clear(const TrackSequence& gt, const TrackSequence& pred, double thr) {
  ClearResult r;
  std::map<int, int> previous;   // gt id -> tracker id matched in the prior frame
  std::map<int, int> last_seen;  // gt id -> tracker id of the latest match
  const std::size_t frames = frame_count(gt, pred);
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameBoxes g = frame_of(gt, t);
    const FrameBoxes p = frame_of(pred, t);
    auto valid = [&](std::size_t i, std::size_t j) { return iou(g[i].box, p[j].box) >= thr - kEps; };

    std::set<std::size_t> kept_g;
    std::set<std::size_t> kept_p;
    Pairs matches;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto it = previous.find(g[i].id);
      if (it == previous.end()) continue;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j].id == it->second && valid(i, j)) {
          matches.emplace_back(i, j);
          kept_g.insert(i);
          kept_p.insert(j);
        }
      }
    }
    Pairs best;
    double best_iou = -1.0;
    for_each_matching(
        g.size(), p.size(), [&](std::size_t i, std::size_t j) { return !kept_g.count(i) && !kept_p.count(j) && valid(i, j); },
        [&](const Pairs& m) {
          double total = 0.0;
          for (auto [i, j] : m) total += iou(g[i].box, p[j].box);
          if (total > best_iou) {
            best = m;
            best_iou = total;
          }
        });
    matches.insert(matches.end(), best.begin(), best.end());

    std::map<int, int> now;
    for (auto [i, j] : matches) {
      const auto it = last_seen.find(g[i].id);
      if (it != last_seen.end() && it->second != p[j].id) ++r.idsw;
      last_seen[g[i].id] = p[j].id;
      now[g[i].id] = p[j].id;
    }
    previous = now;
    r.tp += matches.size();
    r.fn += g.size() - matches.size();
    r.fp += p.size() - matches.size();
    r.gt_dets += g.size();
  }
  const double gt_total = static_cast<double>(r.gt_dets);
  r.mota = gt_total > 0.0 ? (static_cast<double>(r.tp) - static_cast<double>(r.fp) - static_cast<double>(r.idsw)) / gt_total
                          : static_cast<double>(r.tp) - static_cast<double>(r.fp) - static_cast<double>(r.idsw);
  return r;
}

IdResult brute_idf1(const TrackSequence& gt, const TrackSequence& pred, double thr) {
  IdResult r;
  std::vector<int> gids;
  std::vector<int> pids;
  for (const auto& [id, n] : presence(gt)) gids.push_back(id);
  for (const auto& [id, n] : presence(pred)) pids.push_back(id);
  std::map<std::pair<int, int>, std::size_t> overlap;
  const std::size_t frames = frame_count(gt, pred);
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameBoxes g = frame_of(gt, t);
    const FrameBoxes p = frame_of(pred, t);
    r.gt_dets += g.size();
    r.pred_dets += p.size();
    for (const auto& a : g) {
      for (const auto& b : p) {
        if (iou(a.box, b.box) >= thr - kEps) ++overlap[{a.id, b.id}];
      }
    }
  }
  auto count = [&](std::size_t i, std::size_t j) {
    const auto it = overlap.find({gids[i], pids[j]});
    return it == overlap.end() ? std::size_t{0} : it->second;
  };
  for_each_matching(
      gids.size(), pids.size(), [](std::size_t, std::size_t) { return true; },
      [&](const Pairs& m) {
        std::size_t total = 0;
        for (auto [i, j] : m) total += count(i, j);
        r.idtp = std::max(r.idtp, total);
      });
  const std::size_t all = r.gt_dets + r.pred_dets;
  r.idf1 = all > 0 ? 2.0 * static_cast<double>(r.idtp) / static_cast<double>(all) : 0.0;
  return r;
}

MetricsCase random_metrics_case(Rng& rng, int max_targets, int max_frames) {
  const int targets = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_targets)));
  const int frames = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_frames)));
  MetricsCase c;
  c.gt.resize(static_cast<std::size_t>(frames));
  c.pred.resize(static_cast<std::size_t>(frames));
  int next_pred = 100;
  for (int g = 1; g <= targets; ++g) {
    BoundingBox b{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)};
    const double jitter = rng.uniform(0.0, 0.3);
    int pid = next_pred++;
    // Fragment into a fresh id, or steal a neighbour's id, at a random frame.
    const int change_at = rng.uniform() < 0.5 ? 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(frames))) : 0;
    const bool swap = rng.uniform() < 0.5;
    for (int t = 0; t < frames; ++t) {
      b.cx = std::clamp(b.cx + rng.uniform(-0.03, 0.03), 0.1, 0.9);
      b.cy = std::clamp(b.cy + rng.uniform(-0.03, 0.03), 0.1, 0.9);
      if (rng.uniform() < 0.15) continue;
      c.gt[static_cast<std::size_t>(t)].push_back({g, b});
      if (t + 1 == change_at) pid = swap ? 100 + static_cast<int>(rng.below(static_cast<std::uint64_t>(targets))) : next_pred++;
      if (rng.uniform() < 0.1) continue;
      const BoundingBox q{b.cx + jitter * b.w * rng.uniform(-1.0, 1.0), b.cy + jitter * b.h * rng.uniform(-1.0, 1.0),
                          b.w * (1.0 + jitter * rng.uniform(-1.0, 1.0)), b.h * (1.0 + jitter * rng.uniform(-1.0, 1.0))};
      auto& frame = c.pred[static_cast<std::size_t>(t)];
      // A stolen id may already be present in this frame.
      if (std::any_of(frame.begin(), frame.end(), [&](const LabeledBox& x) { return x.id == pid; })) continue;
      frame.push_back({pid, q});
    }
  }
  const int clutter = static_cast<int>(rng.below(3));
  for (int k = 0; k < clutter; ++k) {
    const int id = next_pred++;
    for (int t = 0; t < frames; ++t) {
      if (rng.uniform() < 0.5) continue;
      c.pred[static_cast<std::size_t>(t)].push_back(
          {id, BoundingBox{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.2)}});
    }
  }
  return c;
}

}  // namespace memotr::oracle

#include "memotr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace memotr {

Assignment hungarian(const Tensor2& cost) {
  if (!cost.all_finite()) throw NumericError("hungarian: cost matrix has non-finite entries");
  Assignment out;
  if (cost.rows() == 0 || cost.cols() == 0) return out;
  const bool flip = cost.rows() > cost.cols();
  const std::size_t n = flip ? cost.cols() : cost.rows();
  const std::size_t m = flip ? cost.rows() : cost.cols();
  auto a = [&](std::size_t i, std::size_t j) { return flip ? cost(j - 1, i - 1) : cost(i - 1, j - 1); };

  // Shortest augmenting paths with potentials; 1-based, column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (flip) {
      out.pairs.emplace_back(j - 1, p[j] - 1);
    } else {
      out.pairs.emplace_back(p[j] - 1, j - 1);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (auto [r, c] : out.pairs) out.cost += cost(r, c);
  return out;
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Dense renumbering of the ids that occur in a sequence.
struct IdIndex {
  std::map<int, std::size_t> index;
  std::vector<std::size_t> frames_present;

  explicit IdIndex(const TrackSequence& seq) {
    for (const auto& frame : seq) {
      for (const LabeledBox& b : frame) index.emplace(b.id, 0);
    }
    std::size_t k = 0;
    for (auto& [id, i] : index) i = k++;
    frames_present.assign(k, 0);
    for (const auto& frame : seq) {
      for (const LabeledBox& b : frame) ++frames_present[index.at(b.id)];
    }
  }
  std::size_t size() const { return frames_present.size(); }
  std::size_t operator[](int id) const { return index.at(id); }
};

Tensor2 iou_matrix(const FrameBoxes& gt, const FrameBoxes& pred) {
  Tensor2 s(gt.size(), pred.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) s(i, j) = iou(gt[i].box, pred[j].box);
  }
  return s;
}

std::size_t common_length(const TrackSequence& gt, const TrackSequence& pred) {
  return std::max(gt.size(), pred.size());
}

const FrameBoxes& frame_at(const TrackSequence& seq, std::size_t t) {
  static const FrameBoxes empty;
  return t < seq.size() ? seq[t] : empty;
}

}  // namespace

ClearResult clear_mot(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold) {
  ClearResult r;
  const IdIndex gids(gt);
  constexpr int none = std::numeric_limits<int>::min();
  std::vector<int> last_match(gids.size(), none);       // tracker id last matched, ever
  std::vector<int> previous_frame(gids.size(), none);   // tracker id matched in the prior frame
  const std::size_t frames = common_length(gt, pred);
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameBoxes& g = frame_at(gt, t);
    const FrameBoxes& p = frame_at(pred, t);
    r.gt_dets += g.size();
    std::vector<int> current(gids.size(), none);
    std::size_t matched = 0;
    if (!g.empty() && !p.empty()) {
      const Tensor2 sim = iou_matrix(g, p);
      Tensor2 cost(g.size(), p.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < p.size(); ++j) {
          if (sim(i, j) < iou_threshold - kEps) continue;
          const bool carried = previous_frame[gids[g[i].id]] == p[j].id;
          cost(i, j) = -(sim(i, j) + (carried ? 1000.0 : 0.0));
        }
      }
      for (auto [i, j] : hungarian(cost).pairs) {
        if (!(cost(i, j) < -kEps)) continue;
        const std::size_t gi = gids[g[i].id];
        if (last_match[gi] != none && last_match[gi] != p[j].id) ++r.idsw;
        last_match[gi] = p[j].id;
        current[gi] = p[j].id;
        ++matched;
      }
    }
    previous_frame = std::move(current);
    r.tp += matched;
    r.fn += g.size() - matched;
    r.fp += p.size() - matched;
  }
  const double denom = std::max<double>(1.0, static_cast<double>(r.tp + r.fn));
  r.mota = (static_cast<double>(r.tp) - static_cast<double>(r.fp) - static_cast<double>(r.idsw)) / denom;
  return r;
}

IdResult idf1(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold) {
  IdResult r;
  const IdIndex gids(gt);
  const IdIndex pids(pred);
  Tensor2 overlap(gids.size(), pids.size());
  const std::size_t frames = common_length(gt, pred);
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameBoxes& g = frame_at(gt, t);
    const FrameBoxes& p = frame_at(pred, t);
    r.gt_dets += g.size();
    r.pred_dets += p.size();
    for (const LabeledBox& a : g) {
      for (const LabeledBox& b : p) {
        if (iou(a.box, b.box) >= iou_threshold - kEps) overlap(gids[a.id], pids[b.id]) += 1.0;
      }
    }
  }
  if (overlap.size() > 0) {
    const Assignment best = hungarian(scale(overlap, -1.0));
    for (auto [i, j] : best.pairs) r.idtp += static_cast<std::size_t>(overlap(i, j));
  }
  const double denom = static_cast<double>(r.gt_dets + r.pred_dets);
  r.idf1 = denom > 0.0 ? 2.0 * static_cast<double>(r.idtp) / denom : 0.0;
  return r;
}

std::array<double, kAlphaCount> hota_alphas() {
  std::array<double, kAlphaCount> a{};
  for (std::size_t i = 0; i < kAlphaCount; ++i) a[i] = 0.05 * static_cast<double>(i + 1);
  return a;
}

HotaResult hota_from_counts(const HotaCounts& c) {
  HotaResult r;
  r.counts = c;
  for (std::size_t k = 0; k < kAlphaCount; ++k) {
    r.deta_alpha[k] = c.tp[k] / std::max(1.0, c.tp[k] + c.fn[k] + c.fp[k]);
    r.assa_alpha[k] = c.assa_sum[k] / std::max(1.0, c.tp[k]);
    r.hota_alpha[k] = std::sqrt(r.deta_alpha[k] * r.assa_alpha[k]);
    r.hota += r.hota_alpha[k];
    r.deta += r.deta_alpha[k];
    r.assa += r.assa_alpha[k];
  }
  r.hota /= static_cast<double>(kAlphaCount);
  r.deta /= static_cast<double>(kAlphaCount);
  r.assa /= static_cast<double>(kAlphaCount);
  return r;
}

HotaResult hota(const TrackSequence& gt, const TrackSequence& pred) {
  const IdIndex gids(gt);
  const IdIndex pids(pred);
  const std::size_t frames = common_length(gt, pred);

  std::vector<Tensor2> sims(frames);
  Tensor2 potential(gids.size(), pids.size());
  for (std::size_t t = 0; t < frames; ++t) {
    const FrameBoxes& g = frame_at(gt, t);
    const FrameBoxes& p = frame_at(pred, t);
    sims[t] = iou_matrix(g, p);
    const Tensor2& s = sims[t];
    std::vector<double> row_sum(g.size(), 0.0), col_sum(p.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        row_sum[i] += s(i, j);
        col_sum[j] += s(i, j);
      }
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double denom = row_sum[i] + col_sum[j] - s(i, j);
        if (denom > kEps) potential(gids[g[i].id], pids[p[j].id]) += s(i, j) / denom;
      }
    }
  }
  Tensor2 alignment(gids.size(), pids.size());
  for (std::size_t a = 0; a < gids.size(); ++a) {
    for (std::size_t b = 0; b < pids.size(); ++b) {
      const double denom = static_cast<double>(gids.frames_present[a] + pids.frames_present[b]) - potential(a, b);
      alignment(a, b) = denom > 0.0 ? potential(a, b) / denom : 0.0;
    }
  }

  HotaCounts counts;
  const auto alphas = hota_alphas();
  for (std::size_t k = 0; k < kAlphaCount; ++k) {
    Tensor2 matches(gids.size(), pids.size());
    for (std::size_t t = 0; t < frames; ++t) {
      const FrameBoxes& g = frame_at(gt, t);
      const FrameBoxes& p = frame_at(pred, t);
      std::size_t tp = 0;
      if (!g.empty() && !p.empty()) {
        const Tensor2& s = sims[t];
        // Every valid pair outweighs the total tie-break of any matching.
        const double base = static_cast<double>(std::min(g.size(), p.size()) + 1);
        Tensor2 cost(g.size(), p.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          for (std::size_t j = 0; j < p.size(); ++j) {
            if (s(i, j) >= alphas[k] - kEps) cost(i, j) = -(base + alignment(gids[g[i].id], pids[p[j].id]) * s(i, j));
          }
        }
        for (auto [i, j] : hungarian(cost).pairs) {
          if (cost(i, j) == 0.0) continue;
          matches(gids[g[i].id], pids[p[j].id]) += 1.0;
          ++tp;
        }
      }
      counts.tp[k] += static_cast<double>(tp);
      counts.fn[k] += static_cast<double>(g.size() - tp);
      counts.fp[k] += static_cast<double>(p.size() - tp);
    }
    for (std::size_t a = 0; a < gids.size(); ++a) {
      for (std::size_t b = 0; b < pids.size(); ++b) {
        const double m = matches(a, b);
        if (m == 0.0) continue;
        const double ass = m / (static_cast<double>(gids.frames_present[a] + pids.frames_present[b]) - m);
        counts.assa_sum[k] += m * ass;
      }
    }
  }
  return hota_from_counts(counts);
}

MetricsReport evaluate(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold) {
  return MetricsReport{hota(gt, pred), clear_mot(gt, pred, iou_threshold), idf1(gt, pred, iou_threshold)};
}

MetricsReport aggregate(std::span<const MetricsReport> reports) {
  HotaCounts counts;
  ClearResult clear;
  IdResult id;
  for (const MetricsReport& r : reports) {
    for (std::size_t k = 0; k < kAlphaCount; ++k) {
      counts.tp[k] += r.hota.counts.tp[k];
      counts.fn[k] += r.hota.counts.fn[k];
      counts.fp[k] += r.hota.counts.fp[k];
      counts.assa_sum[k] += r.hota.counts.assa_sum[k];
    }
    clear.tp += r.clear.tp;
    clear.fp += r.clear.fp;
    clear.fn += r.clear.fn;
    clear.idsw += r.clear.idsw;
    clear.gt_dets += r.clear.gt_dets;
    id.idtp += r.id.idtp;
    id.gt_dets += r.id.gt_dets;
    id.pred_dets += r.id.pred_dets;
  }
  clear.mota = (static_cast<double>(clear.tp) - static_cast<double>(clear.fp) - static_cast<double>(clear.idsw)) /
               std::max<double>(1.0, static_cast<double>(clear.tp + clear.fn));
  const double denom = static_cast<double>(id.gt_dets + id.pred_dets);
  id.idf1 = denom > 0.0 ? 2.0 * static_cast<double>(id.idtp) / denom : 0.0;
  return MetricsReport{hota_from_counts(counts), clear, id};
}

}  // namespace memotr

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "memotr/geometry.hpp"
#include "memotr/linalg.hpp"

namespace memotr {

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), sorted by row
  double cost = 0.0;
};

/// Minimum-cost one-to-one assignment. Rectangular inputs are padded with
/// zero-cost dummies, so min(rows, cols) pairs are returned.
Assignment hungarian(const Tensor2& cost);

struct LabeledBox {
  int id = 0;
  BoundingBox box;
};
using FrameBoxes = std::vector<LabeledBox>;
/// Frame-aligned boxes: element t holds frame t+1.
using TrackSequence = std::vector<FrameBoxes>;

struct ClearResult {
  double mota = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t idsw = 0;
  std::size_t gt_dets = 0;
};

/// CLEAR-MOT. Pairs matched in the previous frame are kept while their IoU
/// stays above the threshold; the rest are matched to maximize total IoU.
/// An ID switch is a gt object matched to a tracker id other than the one it
/// was last matched to. MOTA is unbounded below.
ClearResult clear_mot(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold = 0.5);

struct IdResult {
  double idf1 = 0.0;
  std::size_t idtp = 0;
  std::size_t gt_dets = 0;
  std::size_t pred_dets = 0;
};

IdResult idf1(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold = 0.5);

inline constexpr std::size_t kAlphaCount = 19;
/// 0.05, 0.10, ..., 0.95
std::array<double, kAlphaCount> hota_alphas();

/// Raw HOTA accumulators; kept so sequences can be combined exactly.
struct HotaCounts {
  std::array<double, kAlphaCount> tp{};
  std::array<double, kAlphaCount> fn{};
  std::array<double, kAlphaCount> fp{};
  std::array<double, kAlphaCount> assa_sum{};  // sum over true positives of A(c)
};

struct HotaResult {
  double hota = 0.0;
  double deta = 0.0;
  double assa = 0.0;
  std::array<double, kAlphaCount> hota_alpha{};
  std::array<double, kAlphaCount> deta_alpha{};
  std::array<double, kAlphaCount> assa_alpha{};
  HotaCounts counts;
};

/// Matching per threshold maximizes the number of true positives first, then
/// the summed alignment-weighted similarity.
HotaResult hota(const TrackSequence& gt, const TrackSequence& pred);
HotaResult hota_from_counts(const HotaCounts& counts);

struct MetricsReport {
  HotaResult hota;
  ClearResult clear;
  IdResult id;
};

MetricsReport evaluate(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold = 0.5);

/// Combines per-sequence reports by summing the underlying counts.
MetricsReport aggregate(std::span<const MetricsReport> reports);

}  // namespace memotr

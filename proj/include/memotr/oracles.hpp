#pragma once

#include <cstdint>

#include "memotr/metrics.hpp"
#include "memotr/rng.hpp"

// Slow reference implementations written straight from the metric
// definitions. Used by the unit tests, the acceptance checks and `selftest`.
namespace memotr::oracle {

/// Minimum total cost over every one-to-one assignment of the smaller side,
/// by enumeration. Costs are summed in row order.
double brute_assignment_cost(const Tensor2& cost);

/// Per frame and threshold, every partial matching of valid pairs is
/// enumerated; the largest one wins, ties broken by summed alignment-weighted
/// similarity.
HotaResult brute_hota(const TrackSequence& gt, const TrackSequence& pred);

/// Still-valid correspondences from the previous frame are kept, the rest is
/// the enumerated matching of highest total IoU.
ClearResult brute_clear(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold = 0.5);

/// Best one-to-one identity mapping by enumeration.
IdResult brute_idf1(const TrackSequence& gt, const TrackSequence& pred, double iou_threshold = 0.5);

struct MetricsCase {
  TrackSequence gt;
  TrackSequence pred;
};

/// Random walkers with dropouts, jittered predictions, identity swaps and
/// fragments, and false positives.
MetricsCase random_metrics_case(Rng& rng, int max_targets = 5, int max_frames = 20);

}  // namespace memotr::oracle

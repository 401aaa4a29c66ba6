#pragma once

#include <span>
#include <utility>
#include <vector>

#include "memotr/linalg.hpp"

namespace memotr {

/// Per-track long-term memory: an exponential running average of the track's
/// decoder outputs.
struct LongTermMemory {
  std::vector<double> value;
  bool initialized = false;

  friend bool operator==(const LongTermMemory&, const LongTermMemory&) = default;
};

struct MemoryConfig {
  double lambda = 0.01;  // update rate; 0 freezes memory, 1 keeps only the latest output

  void validate() const;
};

LongTermMemory init_memory(std::span<const double> output);

/// (1 − λ)·m + λ·o. Throws StateError if `m` was never initialized.
LongTermMemory ema_update(const LongTermMemory& m, std::span<const double> output,
                          const MemoryConfig& cfg);

/// Row-wise form used by the TIM: (1 − λ)·M + λ·O for a batch of tracks.
template <class T>
T ema_update_rows(const T& memories, const T& outputs, double lambda) {
  return add(scale(memories, 1.0 - lambda), scale(outputs, lambda));
}

struct TrackState {
  std::vector<double> embedding;
  LongTermMemory memory;

  friend bool operator==(const TrackState&, const TrackState&) = default;
};

/// Confidence-gated commit: the candidate state replaces the old one only
/// when confidence > tau_next; equality keeps the old state.
TrackState commit_gate(const TrackState& old_state, const TrackState& candidate,
                       double confidence, double tau_next);

}  // namespace memotr

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "memotr/decoder.hpp"
#include "memotr/memory.hpp"
#include "memotr/model.hpp"
#include "memotr/tim.hpp"

namespace memotr {

enum class TrackStatus { active, inactive, removed };

struct Track {
  std::uint64_t id = 0;
  std::vector<double> embedding;    // E
  LongTermMemory memory;            // M
  std::vector<double> prev_output;  // O^{t-1}
  TrackStatus status = TrackStatus::active;
  int missed = 0;
  BoundingBox box;
  double confidence = 0.0;
};

/// When a track's previous output is refreshed. The default keeps it frozen
/// on frames whose confidence does not pass tau_next.
enum class PrevOutputPolicy { on_commit, every_frame };

struct InferenceConfig {
  double tau_det = 0.5;
  double tau_tck = 0.5;
  double tau_next = 0.5;
  int t_miss = 30;
  MemoryConfig memory;
  double iou_suppress = 0.7;
  TimVariant variant = TimVariant::full;
  bool ffn_residual = false;
  PrevOutputPolicy prev_output = PrevOutputPolicy::on_commit;
  ModelParams model;

  void validate() const;
  TimOptions tim_options() const { return {variant, memory.lambda, ffn_residual}; }
};

struct TrackOutput {
  std::uint64_t id = 0;
  BoundingBox box;
  double confidence = 0.0;
};

/// Active tracks after one frame, ordered by id.
struct FrameResult {
  int frame = 0;
  std::vector<TrackOutput> tracks;
};

/// Per-track record of one step, for instrumentation.
struct StepTrace {
  std::uint64_t id = 0;
  bool newborn = false;
  double confidence = 0.0;
  bool committed = false;
  bool demoted = false;  // confident, but a duplicate of an older track's output
};

/// Online tracker: decode, heads, newborn merge, TIM, gated commit and the
/// active/inactive/removed state machine. Single-threaded; one per sequence.
class Tracker {
 public:
  explicit Tracker(InferenceConfig cfg);

  FrameResult step(const FrameFeatures& feats);

  /// Live (active or inactive) tracks in id order.
  const std::vector<Track>& tracks() const { return tracks_; }
  const std::vector<StepTrace>& last_trace() const { return trace_; }
  const std::vector<std::uint64_t>& removed_ids() const { return removed_; }
  const InferenceConfig& config() const { return cfg_; }

 private:
  InferenceConfig cfg_;
  std::vector<Track> tracks_;
  std::vector<std::uint64_t> removed_;
  std::vector<StepTrace> trace_;
  std::uint64_t next_id_ = 1;
  std::optional<int> last_frame_;
};

/// Fold of Tracker::step over frames with strictly increasing indices.
std::vector<FrameResult> run_sequence(std::span<const FrameFeatures> frames,
                                      const InferenceConfig& cfg);

}  // namespace memotr

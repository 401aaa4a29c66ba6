#include "memotr/lifecycle.hpp"

#include <algorithm>
#include <string>

namespace memotr {

void InferenceConfig::validate() const {
  for (double t : {tau_det, tau_tck, tau_next, iou_suppress}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("thresholds must lie in [0,1]");
  }
  if (t_miss < 1) throw ConfigError("t_miss must be >= 1");
  memory.validate();
  model.decoder.validate();
  memotr::validate(model.tim, model.decoder.width());
  if (model.queries.empty()) throw ConfigError("model has no detect queries");
}

Tracker::Tracker(InferenceConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

FrameResult Tracker::step(const FrameFeatures& feats) {
  if (last_frame_ && feats.frame <= *last_frame_) {
    throw InputError("frame " + std::to_string(feats.frame) + " arrives after frame " +
                     std::to_string(*last_frame_));
  }
  const std::size_t d = cfg_.model.decoder.width();
  if (feats.size() > 0 && feats.tokens.cols() != d) {
    throw ConfigError("frame width " + std::to_string(feats.tokens.cols()) +
                      " does not match model width " + std::to_string(d));
  }
  last_frame_ = feats.frame;
  trace_.clear();

  const DecoderParams& dec = cfg_.model.decoder;
  const Tensor2 det_embeddings = detection_decode(cfg_.model.queries, feats, dec);

  Tensor2 track_embeddings(tracks_.size(), d);
  Tensor2 track_anchors(tracks_.size(), 2);
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    std::copy(tracks_[i].embedding.begin(), tracks_[i].embedding.end(), track_embeddings.row(i).begin());
    track_anchors(i, 0) = tracks_[i].box.cx;
    track_anchors(i, 1) = tracks_[i].box.cy;
  }
  const JointOutput joint = joint_decode(det_embeddings, detect_query_anchors(cfg_.model.queries),
                                         track_embeddings, track_anchors, feats, dec);
  const std::vector<Detection> det_out = heads(joint.det, dec, DetectionSource::newborn);
  const std::vector<Detection> track_out = heads(joint.track, dec, DetectionSource::tracked);

  // Lifecycle transitions for existing tracks; collect this frame's outputs.
  std::vector<Track> live;
  std::vector<std::vector<double>> outputs;
  std::vector<Detection> confident;
  live.reserve(tracks_.size());
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    Track t = std::move(tracks_[i]);
    const Detection& out = track_out[i];
    t.confidence = out.confidence;
    // Two tracks on one object: the older id keeps it, the younger misses.
    bool duplicate = false;
    for (const Detection& kept : confident) duplicate = duplicate || iou(kept.box, out.box) > cfg_.iou_suppress;
    if (out.confidence > cfg_.tau_tck && !duplicate) {
      t.status = TrackStatus::active;
      t.missed = 0;
      t.box = out.box;
      confident.push_back(out);
    } else {
      t.status = TrackStatus::inactive;
      ++t.missed;
      if (t.missed > cfg_.t_miss) {
        t.status = TrackStatus::removed;
        removed_.push_back(t.id);
        continue;
      }
    }
    trace_.push_back({t.id, false, out.confidence, false, duplicate && out.confidence > cfg_.tau_tck});
    outputs.push_back(out.embedding);
    live.push_back(std::move(t));
  }

  for (std::size_t idx : select_newborns(det_out, confident, cfg_.tau_det, cfg_.iou_suppress)) {
    const Detection& det = det_out[idx];
    Track t;
    t.id = next_id_++;
    t.embedding = det.embedding;
    t.memory = init_memory(det.embedding);
    t.prev_output = det.embedding;
    t.status = TrackStatus::active;
    t.box = det.box;
    t.confidence = det.confidence;
    trace_.push_back({t.id, true, det.confidence, false, false});
    outputs.push_back(det.embedding);
    live.push_back(std::move(t));
  }

  // Temporal interaction for every live track, then the gated commit.
  if (!live.empty()) {
    TrackBatch batch{Tensor2(live.size(), d), Tensor2(live.size(), d), Tensor2(live.size(), d), {}};
    for (std::size_t i = 0; i < live.size(); ++i) {
      std::copy(outputs[i].begin(), outputs[i].end(), batch.outputs.row(i).begin());
      std::copy(live[i].prev_output.begin(), live[i].prev_output.end(), batch.prev_outputs.row(i).begin());
      std::copy(live[i].memory.value.begin(), live[i].memory.value.end(), batch.memories.row(i).begin());
      batch.ids.push_back(live[i].id);
    }
    const TimOutput next = tim_forward(batch, cfg_.model.tim, cfg_.tim_options());
    for (std::size_t i = 0; i < live.size(); ++i) {
      Track& t = live[i];
      const TrackState old_state{t.embedding, t.memory};
      const TrackState candidate{
          std::vector<double>(next.embeddings.row(i).begin(), next.embeddings.row(i).end()),
          LongTermMemory{std::vector<double>(next.memories.row(i).begin(), next.memories.row(i).end()), true}};
      const bool commit = t.confidence > cfg_.tau_next;
      TrackState kept = commit_gate(old_state, candidate, t.confidence, cfg_.tau_next);
      t.embedding = std::move(kept.embedding);
      t.memory = std::move(kept.memory);
      if (commit || cfg_.prev_output == PrevOutputPolicy::every_frame) t.prev_output = outputs[i];
      trace_[i].committed = commit;
    }
  }
  tracks_ = std::move(live);

  FrameResult result;
  result.frame = feats.frame;
  for (const Track& t : tracks_) {
    if (t.status == TrackStatus::active) result.tracks.push_back({t.id, t.box, t.confidence});
  }
  std::sort(result.tracks.begin(), result.tracks.end(),
            [](const TrackOutput& a, const TrackOutput& b) { return a.id < b.id; });
  return result;
}

std::vector<FrameResult> run_sequence(std::span<const FrameFeatures> frames,
                                      const InferenceConfig& cfg) {
  std::vector<FrameResult> results;
  if (frames.empty()) return results;
  Tracker tracker(cfg);
  results.reserve(frames.size());
  for (const FrameFeatures& f : frames) results.push_back(tracker.step(f));
  return results;
}

}  // namespace memotr

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memotr/decoder.hpp"
#include "memotr/geometry.hpp"

namespace memotr {

enum class ScenarioKind { linear, dance, crossing, occlusion_stress };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& name);

/// Frames during which a target emits no token. 1-based, inclusive.
struct OcclusionInterval {
  int target = 1;
  int begin = 1;
  int end = 1;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::dance;
  int targets = 8;
  int frames = 200;
  std::uint64_t seed = 0;
  double similarity = 0.9;    // pairwise cosine of identity signatures
  double noise = 0.05;        // norm of per-frame signature noise
  double drift = 0.002;       // signature rotation per frame, radians
  double speed = 0.006;       // typical displacement per frame
  int distractors = 4;        // background tokens
  double blend = 0.5;         // occluder mix at the hiding threshold
  double hide_coverage = 0.7; // coverage at which a rear target drops out
  std::vector<OcclusionInterval> occlusions;
  int random_occlusions = 0;  // extra scheduled occlusions drawn from the seed
  int max_occlusion = 20;     // longest drawn occlusion, frames
  std::size_t width = 64;

  void validate() const;
};

struct GtObject {
  int id = 0;
  BoundingBox box;
  bool visible = true;
};

struct GroundTruth {
  std::vector<std::vector<GtObject>> frames;  // index 0 is frame 1

  std::size_t visible_count() const;
};

struct Scenario {
  GroundTruth truth;
  std::vector<FrameFeatures> frames;
  std::vector<std::vector<double>> signatures;  // per target, at frame 1
  std::vector<OcclusionInterval> occlusions;    // resolved schedule
};

/// Deterministic in the config: the same seed gives byte-identical streams.
/// Each visible target contributes one token [signature | centre | box logits
/// | objectness]; background tokens carry random signatures and zero
/// objectness. Token values are rounded to 32-bit precision so fixture files
/// round-trip exactly.
Scenario generate(const ScenarioConfig& cfg);

/// Largest pairwise cosine among the given signatures.
double max_pairwise_cosine(const std::vector<std::vector<double>>& signatures);

/// Default suite used by the ablation harness and acceptance checks.
ScenarioConfig suite_config(const std::string& suite, std::uint64_t seed, int frames);

}  // namespace memotr

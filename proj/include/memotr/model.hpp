#pragma once

#include <cstdint>
#include <vector>

#include "memotr/decoder.hpp"
#include "memotr/tim.hpp"

namespace memotr {

struct ModelShape {
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t det_layers = 1;    // L_det
  std::size_t joint_layers = 5;  // L_joint
  std::size_t det_queries = 16;  // laid out on a square grid
  std::size_t fuse_hidden = 0;   // 0 -> 2d
  std::size_t ffn_hidden = 0;    // 0 -> 4d

  std::size_t fuse_hidden_width() const { return fuse_hidden ? fuse_hidden : 2 * width; }
  std::size_t ffn_hidden_width() const { return ffn_hidden ? ffn_hidden : 4 * width; }
  void validate() const;
};

struct ModelParams {
  DecoderParams decoder;
  TimParams tim;
  std::vector<DetectQuery> queries;
};

/// Anchors on a g×g grid of cell centres (count must be a perfect square).
std::vector<Point> grid_anchors(std::size_t count);

/// Seeded random initialization (scaled Gaussian weights, post-norm decoder).
ModelParams random_model(const ModelShape& shape, std::uint64_t seed);
/// Random TIM weights alone, for any width divisible by `heads`.
TimParams random_tim(std::size_t width, std::size_t heads, std::uint64_t seed);

/// Hand-set weights that make the untrained pipeline track the synthetic
/// scenario tokens: detect queries localize the token in their grid cell,
/// track queries re-find their target by signature and position, and the TIM
/// carries the signature forward. Each TIM variant gets its own output gain
/// so that track embeddings have the same scale across variants.
struct StructuredGains {
  double det_position = 50000.0;  // detect cross-attention position sharpness
  double det_objectness = 50.0;
  double det_reach = 2600.0;      // logit margin before a detect query falls back to the null key
  double track_position = 100.0;
  double track_appearance = 300.0;
  double track_objectness = 50.0;
  double track_threshold = 0.93;  // appearance score a track needs to beat the null key
  double conf_objectness = 10.0;
  double conf_cell = 2000.0;
  double weight_sharpness = 10.0;
  double memory_attention_sharpness = 400.0;
  double memory_attention_gain = 0.2;
  double embedding_scale = 0.01;

  /// Places the appearance threshold 30% of the way from the expected
  /// cross-identity cosine to a perfect match.
  static StructuredGains for_similarity(double similarity);
};

ModelParams structured_model(const ModelShape& shape, TimVariant variant,
                             const StructuredGains& gains = {});

}  // namespace memotr

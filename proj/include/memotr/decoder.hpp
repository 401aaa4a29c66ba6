#pragma once

#include <cstddef>
#include <vector>

#include "memotr/attention.hpp"
#include "memotr/geometry.hpp"
#include "memotr/layout.hpp"

namespace memotr {

/// Learnable detect query: content embedding plus a fixed anchor.
struct DetectQuery {
  std::vector<double> embedding;
  Point anchor;
};

/// Per-frame token set standing in for an encoded image.
struct FrameFeatures {
  Tensor2 tokens;     // N×d
  Tensor2 positions;  // N×2, normalized
  int frame = 1;

  std::size_t size() const { return tokens.rows(); }
  friend bool operator==(const FrameFeatures&, const FrameFeatures&) = default;
};

/// One decoder layer: self-attention, cross-attention into the frame tokens,
/// FFN. Residual around each; optional normalization after cross-attention.
struct DecoderLayerParams {
  AttentionParams self_attn;
  AttentionParams cross_attn;
  MlpParams ffn;
  bool post_norm = false;
};

struct DecoderParams {
  TokenLayout layout;
  std::vector<DecoderLayerParams> det_layers;    // D_det
  std::vector<DecoderLayerParams> joint_layers;  // D_joint
  MlpParams box_head;   // d -> 4, sigmoid applied
  MlpParams conf_head;  // d -> 1, sigmoid applied
  Tensor2 null_token;   // 1×d key/value appended to every cross-attention; may be empty

  std::size_t width() const { return layout.width; }
  void validate() const;
};

/// Layer whose sublayers contribute nothing: outputs equal inputs.
DecoderLayerParams identity_layer(std::size_t width, std::size_t heads);

enum class DetectionSource { newborn, tracked };

struct Detection {
  BoundingBox box;
  double confidence = 0.0;
  DetectionSource source = DetectionSource::newborn;
  std::vector<double> embedding;
};

/// Runs `x` (queries, with `anchors` N×2) through `layers`.
Tensor2 run_decoder_layers(const Tensor2& x, const Tensor2& anchors,
                           const std::vector<DecoderLayerParams>& layers,
                           const FrameFeatures& feats, const DecoderParams& p);

Tensor2 detect_query_embeddings(const std::vector<DetectQuery>& queries);
Tensor2 detect_query_anchors(const std::vector<DetectQuery>& queries);

/// D_det: detect embeddings, one row per query. With no frame tokens the
/// cross-attention is skipped and only self-attention and FFN act.
Tensor2 detection_decode(const std::vector<DetectQuery>& queries, const FrameFeatures& feats,
                         const DecoderParams& p);

struct JointOutput {
  Tensor2 det;    // O_det
  Tensor2 track;  // O_tck
};

/// D_joint over the concatenation [E_det; E_tck]; outputs are split back in
/// the same order.
JointOutput joint_decode(const Tensor2& det_embeddings, const Tensor2& det_anchors,
                         const Tensor2& track_embeddings, const Tensor2& track_anchors,
                         const FrameFeatures& feats, const DecoderParams& p);

/// Box (sigmoid-squashed, so inside the unit square) and confidence per row.
std::vector<Detection> heads(const Tensor2& outputs, const DecoderParams& p,
                             DetectionSource source = DetectionSource::newborn);

/// Indices (ascending) of `dets` with confidence > tau_det that overlap no
/// `tracked` box and no higher-confidence chosen detection by more than
/// iou_suppress.
std::vector<std::size_t> select_newborns(const std::vector<Detection>& dets,
                                         const std::vector<Detection>& tracked, double tau_det,
                                         double iou_suppress);

/// tracked ∪ newborns, tracked first.
std::vector<Detection> merge_newborns(const std::vector<Detection>& dets,
                                      const std::vector<Detection>& tracked, double tau_det,
                                      double iou_suppress);

}  // namespace memotr

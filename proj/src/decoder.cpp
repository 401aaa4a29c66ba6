#include "memotr/decoder.hpp"

#include <algorithm>
#include <cmath>

namespace memotr {

namespace {

Tensor2 layer_norm_rows(const Tensor2& x) {
  Tensor2 out = x;
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = out.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (double& v : row) v = (v - mean) * inv;
  }
  return out;
}

bool all_zero(const Tensor2& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return v == 0.0; });
}

// A sublayer whose output projection is zero adds exactly nothing; skipping it
// leaves results bit-identical.
Tensor2 decoder_layer(const Tensor2& x, const Tensor2& query_pe, const Tensor2& keys,
                      const Tensor2& values, const DecoderLayerParams& p) {
  Tensor2 h = x;
  if (!all_zero(p.self_attn.wo)) {
    const Tensor2 qk = add(x, query_pe);
    h = add(x, mha(qk, qk, x, p.self_attn));
  }
  if (keys.rows() > 0) {
    if (!all_zero(p.cross_attn.wo)) h = add(h, mha(add(h, query_pe), keys, values, p.cross_attn));
    if (p.post_norm) h = layer_norm_rows(h);
  }
  if (all_zero(p.ffn.w2) && all_zero(p.ffn.b2)) return h;
  return add(h, mlp2(h, p.ffn, Activation::relu));
}

void check_features(const FrameFeatures& feats, std::size_t width) {
  if (feats.tokens.rows() == 0) return;
  if (feats.tokens.cols() != width) throw ShapeError("frame tokens width does not match model");
  if (feats.positions.rows() != feats.tokens.rows() || feats.positions.cols() != 2) {
    throw ShapeError("frame positions must be N x 2 aligned with tokens");
  }
}

}  // namespace

void DecoderParams::validate() const {
  const std::size_t d = layout.width;
  for (const auto* group : {&det_layers, &joint_layers}) {
    for (const auto& layer : *group) {
      memotr::validate(layer.self_attn);
      memotr::validate(layer.cross_attn);
      memotr::validate(layer.ffn);
      if (layer.self_attn.width() != d || layer.cross_attn.width() != d ||
          layer.ffn.in_width() != d || layer.ffn.out_width() != d) {
        throw ShapeError("decoder layer width mismatch");
      }
    }
  }
  if (joint_layers.empty()) throw ShapeError("decoder needs at least one joint layer");
  memotr::validate(box_head);
  memotr::validate(conf_head);
  if (box_head.in_width() != d || box_head.out_width() != 4) throw ShapeError("box head must map d -> 4");
  if (conf_head.in_width() != d || conf_head.out_width() != 1) {
    throw ShapeError("confidence head must map d -> 1");
  }
  if (!null_token.empty() && (null_token.rows() != 1 || null_token.cols() != d)) {
    throw ShapeError("null token must be 1 x d");
  }
}

DecoderLayerParams identity_layer(std::size_t width, std::size_t heads) {
  AttentionParams attn = identity_attention(width, heads);
  attn.wo = Tensor2(width, width);
  return DecoderLayerParams{attn, attn, zero_mlp(width, width, width), false};
}

Tensor2 run_decoder_layers(const Tensor2& x, const Tensor2& anchors,
                           const std::vector<DecoderLayerParams>& layers,
                           const FrameFeatures& feats, const DecoderParams& p) {
  if (x.rows() > 0 && x.cols() != p.width()) throw ShapeError("query width does not match model");
  if (anchors.rows() != x.rows()) throw ShapeError("one anchor per query row required");
  check_features(feats, p.width());
  if (x.rows() == 0 || layers.empty()) return x;

  const Tensor2 query_pe = position_encoding(anchors, p.layout);
  Tensor2 keys;
  Tensor2 values;
  if (feats.size() > 0) {
    const Tensor2 key_pe = position_encoding(feats.positions, p.layout);
    const Tensor2 token_keys = add(feats.tokens, key_pe);
    if (p.null_token.empty()) {
      keys = token_keys;
      values = feats.tokens;
    } else {
      const Tensor2 k_parts[] = {token_keys, p.null_token};
      const Tensor2 v_parts[] = {feats.tokens, p.null_token};
      keys = concat_rows(k_parts);
      values = concat_rows(v_parts);
    }
  }
  Tensor2 h = x;
  for (const auto& layer : layers) h = decoder_layer(h, query_pe, keys, values, layer);
  return h;
}

Tensor2 detect_query_embeddings(const std::vector<DetectQuery>& queries) {
  if (queries.empty()) return {};
  const std::size_t d = queries.front().embedding.size();
  Tensor2 out(queries.size(), d);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].embedding.size() != d) throw ShapeError("detect queries differ in width");
    std::copy(queries[i].embedding.begin(), queries[i].embedding.end(), out.row(i).begin());
  }
  return out;
}

Tensor2 detect_query_anchors(const std::vector<DetectQuery>& queries) {
  Tensor2 out(queries.size(), 2);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Point a = queries[i].anchor;
    if (a.x < 0.0 || a.x > 1.0 || a.y < 0.0 || a.y > 1.0) {
      throw ValidationError("detect query anchor outside the unit square");
    }
    out(i, 0) = a.x;
    out(i, 1) = a.y;
  }
  return out;
}

Tensor2 detection_decode(const std::vector<DetectQuery>& queries, const FrameFeatures& feats,
                         const DecoderParams& p) {
  if (queries.empty()) throw ValidationError("detection_decode: no detect queries");
  return run_decoder_layers(detect_query_embeddings(queries), detect_query_anchors(queries),
                            p.det_layers, feats, p);
}

JointOutput joint_decode(const Tensor2& det_embeddings, const Tensor2& det_anchors,
                         const Tensor2& track_embeddings, const Tensor2& track_anchors,
                         const FrameFeatures& feats, const DecoderParams& p) {
  const std::size_t d = p.width();
  const std::size_t n_det = det_embeddings.rows();
  const std::size_t n_tck = track_embeddings.rows();
  if ((n_det > 0 && det_embeddings.cols() != d) || (n_tck > 0 && track_embeddings.cols() != d)) {
    throw ShapeError("joint_decode: embedding width mismatch");
  }
  const Tensor2 x_parts[] = {n_det > 0 ? det_embeddings : Tensor2(0, d),
                             n_tck > 0 ? track_embeddings : Tensor2(0, d)};
  const Tensor2 a_parts[] = {n_det > 0 ? det_anchors : Tensor2(0, 2),
                             n_tck > 0 ? track_anchors : Tensor2(0, 2)};
  const Tensor2 out =
      run_decoder_layers(concat_rows(x_parts), concat_rows(a_parts), p.joint_layers, feats, p);
  return {slice_rows(out, 0, n_det), slice_rows(out, n_det, n_tck)};
}

std::vector<Detection> heads(const Tensor2& outputs, const DecoderParams& p,
                             DetectionSource source) {
  std::vector<Detection> result;
  if (outputs.rows() == 0) return result;
  const Tensor2 boxes = sigmoid(mlp2(outputs, p.box_head, Activation::relu));
  const Tensor2 conf = sigmoid(mlp2(outputs, p.conf_head, Activation::relu));
  result.reserve(outputs.rows());
  for (std::size_t r = 0; r < outputs.rows(); ++r) {
    Detection det;
    // Clip the extent, not just the centre, to the unit square.
    const double left = std::clamp(boxes(r, 0) - 0.5 * boxes(r, 2), 0.0, 1.0);
    const double right = std::clamp(boxes(r, 0) + 0.5 * boxes(r, 2), 0.0, 1.0);
    const double top = std::clamp(boxes(r, 1) - 0.5 * boxes(r, 3), 0.0, 1.0);
    const double bottom = std::clamp(boxes(r, 1) + 0.5 * boxes(r, 3), 0.0, 1.0);
    det.box = BoundingBox{0.5 * (left + right), 0.5 * (top + bottom), right - left, bottom - top};
    det.confidence = std::clamp(conf(r, 0), 0.0, 1.0);
    det.source = source;
    det.embedding.assign(outputs.row(r).begin(), outputs.row(r).end());
    result.push_back(std::move(det));
  }
  return result;
}

std::vector<std::size_t> select_newborns(const std::vector<Detection>& dets,
                                         const std::vector<Detection>& tracked, double tau_det,
                                         double iou_suppress) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].confidence > tau_det) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  // Greedy: a candidate is dropped if it overlaps a tracked output or a
  // stronger candidate already kept.
  std::vector<std::size_t> chosen;
  for (std::size_t i : order) {
    double best = 0.0;
    for (const auto& t : tracked) best = std::max(best, iou(dets[i].box, t.box));
    for (std::size_t j : chosen) best = std::max(best, iou(dets[i].box, dets[j].box));
    if (best <= iou_suppress) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<Detection> merge_newborns(const std::vector<Detection>& dets,
                                      const std::vector<Detection>& tracked, double tau_det,
                                      double iou_suppress) {
  std::vector<Detection> merged = tracked;
  for (auto& t : merged) t.source = DetectionSource::tracked;
  for (std::size_t i : select_newborns(dets, tracked, tau_det, iou_suppress)) {
    Detection d = dets[i];
    d.source = DetectionSource::newborn;
    merged.push_back(std::move(d));
  }
  return merged;
}

}  // namespace memotr

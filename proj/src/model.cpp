#include "memotr/model.hpp"

#include <cmath>
#include <string>

#include "memotr/rng.hpp"

namespace memotr {

void ModelShape::validate() const {
  if (heads == 0 || width % heads != 0) throw ConfigError("model width must be divisible by heads");
  if (joint_layers == 0) throw ConfigError("l_joint must be >= 1");
  if (det_queries == 0) throw ConfigError("need at least one detect query");
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(det_queries))));
  if (side * side != det_queries) throw ConfigError("detect query count must be a perfect square");
  (void)TokenLayout::for_width(width);
}

std::vector<Point> grid_anchors(std::size_t count) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(count))));
  if (side * side != count) throw ConfigError("detect query count must be a perfect square");
  std::vector<Point> anchors;
  anchors.reserve(count);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      anchors.push_back({(static_cast<double>(c) + 0.5) / static_cast<double>(side),
                         (static_cast<double>(r) + 0.5) / static_cast<double>(side)});
    }
  }
  return anchors;
}

namespace {

MlpParams random_mlp(Rng& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  return MlpParams{rng.normal_tensor(in, hidden, 1.0 / std::sqrt(static_cast<double>(in))),
                   rng.normal_tensor(1, hidden, 0.1),
                   rng.normal_tensor(hidden, out, 1.0 / std::sqrt(static_cast<double>(hidden))),
                   rng.normal_tensor(1, out, 0.1)};
}

AttentionParams random_attention(Rng& rng, std::size_t d, std::size_t heads) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  return AttentionParams{rng.normal_tensor(d, d, s), rng.normal_tensor(d, d, s),
                         rng.normal_tensor(d, d, s), rng.normal_tensor(d, d, s), heads};
}

DecoderLayerParams random_layer(Rng& rng, std::size_t d, std::size_t heads) {
  return DecoderLayerParams{random_attention(rng, d, heads), random_attention(rng, d, heads),
                            random_mlp(rng, d, 2 * d, d), true};
}

// Hidden pair (relu(x), relu(-x)) reproducing a linear map through one ReLU layer.
void linear_pair(MlpParams& p, std::size_t in, std::size_t unit, std::size_t out, double gain) {
  p.w1(in, unit) = 1.0;
  p.w1(in, unit + 1) = -1.0;
  p.w2(unit, out) = gain;
  p.w2(unit + 1, out) = -gain;
}

TimParams random_tim(Rng& rng, std::size_t d, std::size_t heads, std::size_t fuse_hidden,
                     std::size_t ffn_hidden) {
  TimParams p;
  p.weight_mlp = random_mlp(rng, d, d, d);
  p.fuse_mlp = random_mlp(rng, 2 * d, fuse_hidden, d);
  p.attn = random_attention(rng, d, heads);
  p.ffn = random_mlp(rng, d, ffn_hidden, d);
  return p;
}

}  // namespace

TimParams random_tim(std::size_t width, std::size_t heads, std::uint64_t seed) {
  if (width == 0 || heads == 0 || width % heads != 0) throw ConfigError("tim width must be divisible by heads");
  Rng rng(seed);
  return random_tim(rng, width, heads, 2 * width, 4 * width);
}

StructuredGains StructuredGains::for_similarity(double similarity) {
  if (!(similarity >= 0.0 && similarity <= 1.0)) throw ConfigError("similarity must lie in [0,1]");
  StructuredGains g;
  g.track_threshold = similarity + 0.3 * (1.0 - similarity);
  return g;
}

ModelParams random_model(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  Rng rng(seed);
  const std::size_t d = shape.width;
  ModelParams m;
  m.decoder.layout = TokenLayout::for_width(d);
  for (std::size_t i = 0; i < shape.det_layers; ++i) m.decoder.det_layers.push_back(random_layer(rng, d, shape.heads));
  for (std::size_t i = 0; i < shape.joint_layers; ++i) m.decoder.joint_layers.push_back(random_layer(rng, d, shape.heads));
  m.decoder.box_head = random_mlp(rng, d, d, 4);
  m.decoder.conf_head = random_mlp(rng, d, d, 1);
  m.decoder.null_token = rng.normal_tensor(1, d, 1.0);

  m.tim = random_tim(rng, d, shape.heads, shape.fuse_hidden_width(), shape.ffn_hidden_width());

  for (const Point& a : grid_anchors(shape.det_queries)) {
    const Tensor2 e = rng.normal_tensor(1, d, 1.0);
    m.queries.push_back(DetectQuery{std::vector<double>(e.values().begin(), e.values().end()), a});
  }
  return m;
}

ModelParams structured_model(const ModelShape& shape, TimVariant variant,
                             const StructuredGains& g) {
  shape.validate();
  const std::size_t d = shape.width;
  const TokenLayout L = TokenLayout::for_width(d);
  const std::size_t sig = L.signature_dim;
  const auto grid_side = static_cast<double>(std::llround(std::sqrt(static_cast<double>(shape.det_queries))));
  ModelParams m;
  m.decoder.layout = L;

  // Cross-attention runs single-headed so one softmax covers the full
  // signature, position and null-key terms. Logit = q·k / sqrt(d); the sqrt
  // is folded into the query gains.
  const double s = std::sqrt(static_cast<double>(d));
  auto cross_base = [&] {
    AttentionParams a{Tensor2::identity(d), Tensor2::identity(d), Tensor2(d, d),
                      Tensor2::identity(d), 1};
    a.wq = Tensor2(d, d);
    for (std::size_t c = 0; c < sig; ++c) a.wv(c, c) = 1.0;
    for (std::size_t c : {L.pos_x, L.pos_y, L.box_begin, L.box_begin + 1, L.box_begin + 2,
                          L.box_begin + 3, L.objectness}) {
      a.wv(c, c) = 1.0;
    }
    return a;
  };
  auto set_position_gain = [&](AttentionParams& a, double gain) {
    // Lowest frequency only: gain·(cos(wΔx) + cos(wΔy)) is monotone in the
    // offset over the whole unit square.
    for (std::size_t c = 0; c < 4; ++c) a.wq(L.pe_begin + c, L.pe_begin + c) = s * gain;
  };

  {
    AttentionParams cross = cross_base();
    set_position_gain(cross, g.det_position);
    cross.wq(L.det_flag, L.objectness) = s * g.det_objectness;
    cross.wq(L.det_flag, L.null_flag) = s * (2.0 * g.det_position + g.det_objectness - g.det_reach);
    const std::size_t layers = shape.det_layers;
    for (std::size_t i = 0; i < layers; ++i) {
      DecoderLayerParams layer = identity_layer(d, shape.heads);
      if (i == 0) layer.cross_attn = cross;
      m.decoder.det_layers.push_back(layer);
    }
  }
  {
    AttentionParams cross = cross_base();
    set_position_gain(cross, g.track_position);
    for (std::size_t c = 0; c < sig; ++c) cross.wq(c, c) = s * g.track_appearance / g.embedding_scale;
    cross.wq(L.track_flag, L.objectness) = s * g.track_objectness;
    cross.wq(L.track_flag, L.null_flag) =
        s * (2.0 * g.track_position + g.track_objectness + g.track_appearance * g.track_threshold);
    // Detect rows already carry their token; park them on the null key.
    cross.wq(L.det_flag, L.null_flag) =
        s * (2.0 * g.track_position + g.track_objectness +
             10.0 * g.track_appearance / g.embedding_scale);
    for (std::size_t i = 0; i < shape.joint_layers; ++i) {
      DecoderLayerParams layer = identity_layer(d, shape.heads);
      if (i == 0) layer.cross_attn = cross;
      m.decoder.joint_layers.push_back(layer);
    }
  }

  m.decoder.null_token = Tensor2(1, d);
  m.decoder.null_token(0, L.null_flag) = 1.0;

  m.decoder.box_head = zero_mlp(d, d, 4);
  for (std::size_t c = 0; c < 4; ++c) linear_pair(m.decoder.box_head, L.box_begin + c, 2 * c, c, 1.0);

  // Confidence: objectness of the attended content, minus a steep penalty on
  // detect rows whose attended centre lies outside the query's grid cell.
  MlpParams& conf = m.decoder.conf_head;
  conf = zero_mlp(d, d, 1);
  conf.w1(L.objectness, 0) = 1.0;
  conf.w2(0, 0) = g.conf_objectness;
  conf.b2(0, 0) = -0.5 * g.conf_objectness;
  const double half_cell = 0.5 / grid_side;
  const double mask = 10.0;
  std::size_t unit = 1;
  for (auto [pos, anchor] : {std::pair{L.pos_x, L.anchor_x}, std::pair{L.pos_y, L.anchor_y}}) {
    for (double sign : {1.0, -1.0}) {
      conf.w1(pos, unit) = sign;
      conf.w1(anchor, unit) = -sign;
      conf.w1(L.det_flag, unit) = mask;
      conf.b1(0, unit) = -half_cell - mask;
      conf.w2(unit, 0) = -g.conf_cell;
      ++unit;
    }
  }

  for (const Point& a : grid_anchors(shape.det_queries)) {
    std::vector<double> e(d, 0.0);
    e[L.anchor_x] = a.x;
    e[L.anchor_y] = a.y;
    e[L.det_flag] = 1.0;
    m.queries.push_back(DetectQuery{std::move(e), a});
  }

  // TIM.
  TimParams& tim = m.tim;
  tim.weight_mlp = zero_mlp(d, d, d);
  tim.weight_mlp.w1(L.objectness, 0) = 1.0;
  for (std::size_t c = 0; c < d; ++c) {
    tim.weight_mlp.w2(0, c) = g.weight_sharpness;
    tim.weight_mlp.b2(0, c) = -0.5 * g.weight_sharpness;
  }

  const std::size_t fuse_hidden = shape.fuse_hidden_width();
  if (fuse_hidden < 2 * sig) throw ConfigError("fuse hidden width too small for structured mode");
  tim.fuse_mlp = zero_mlp(2 * d, fuse_hidden, d);
  for (std::size_t c = 0; c < sig; ++c) {
    tim.fuse_mlp.w1(c, 2 * c) = 0.5;
    tim.fuse_mlp.w1(d + c, 2 * c) = 0.5;
    tim.fuse_mlp.w1(c, 2 * c + 1) = -0.5;
    tim.fuse_mlp.w1(d + c, 2 * c + 1) = -0.5;
    tim.fuse_mlp.w2(2 * c, c) = 1.0;
    tim.fuse_mlp.w2(2 * c + 1, c) = -1.0;
  }

  // Memory-attention runs single-headed on the whole signature: a track's
  // query must score its own memory above every other track's, and with
  // near-duplicate identities no 8-channel chunk separates them reliably.
  tim.attn = AttentionParams{Tensor2(d, d), Tensor2(d, d), Tensor2(d, d), Tensor2(d, d), 1};
  for (std::size_t c = 0; c < sig; ++c) {
    tim.attn.wq(c, c) = g.memory_attention_sharpness * s;
    tim.attn.wk(c, c) = 1.0;
    tim.attn.wv(c, c) = 1.0;
    tim.attn.wo(c, c) = g.memory_attention_gain;
  }

  double out_gain = g.embedding_scale;
  switch (variant) {
    case TimVariant::full:
      out_gain /= 1.0 + g.memory_attention_gain;
      break;
    case TimVariant::memory_off:
      out_gain /= g.memory_attention_gain;
      break;
    case TimVariant::attn_off:
      out_gain /= 2.0;
      break;
    case TimVariant::naive:
      break;
  }
  const std::size_t ffn_hidden = shape.ffn_hidden_width();
  if (ffn_hidden < 2 * sig) throw ConfigError("ffn hidden width too small for structured mode");
  tim.ffn = zero_mlp(d, ffn_hidden, d);
  for (std::size_t c = 0; c < sig; ++c) linear_pair(tim.ffn, c, 2 * c, c, out_gain);
  tim.ffn.b2(0, L.track_flag) = 1.0;

  return m;
}

}  // namespace memotr

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "memotr/attention.hpp"
#include "memotr/memory.hpp"

namespace memotr {

// Temporal Interaction Module: adaptive aggregation of adjacent-frame outputs,
// memory-attention across tracks, and an FFN producing the next embeddings.

template <class T>
struct TimParamsT {
  MlpParamsT<T> weight_mlp;  // d -> d, sigmoid applied afterwards
  MlpParamsT<T> fuse_mlp;    // 2d -> d
  AttentionParamsT<T> attn;  // memory-attention layer
  MlpParamsT<T> ffn;         // d -> d
};

using TimParams = TimParamsT<Tensor2>;

/// Structural variants used by the ablation harness.
///   full       : ffn(M + attn(Q=Ô, K=M, V=O))
///   memory_off : ffn(attn(Q=Ô, K=Ô, V=O))
///   attn_off   : ffn(M + Ô)
///   naive      : ffn(O)
enum class TimVariant { full, memory_off, attn_off, naive };

std::string to_string(TimVariant v);
TimVariant parse_tim_variant(const std::string& name);

struct TimOptions {
  TimVariant variant = TimVariant::full;
  double lambda = 0.01;
  bool ffn_residual = false;
};

/// Rows of all three matrices refer to the same track ids.
struct TrackBatch {
  Tensor2 outputs;       // O^t
  Tensor2 prev_outputs;  // O^{t-1}
  Tensor2 memories;      // M^t
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return outputs.rows(); }
  void validate(std::size_t width) const;
};

template <class T>
struct TimOutputT {
  T embeddings;  // candidate E^{t+1}
  T memories;    // candidate M^{t+1}
};

using TimOutput = TimOutputT<Tensor2>;

void validate(const TimParams& p, std::size_t width);
TimParamsT<Var> lift(Tape& tape, const TimParams& p);

/// Channel-wise weight sigmoid(MLP(O)), one row per track.
template <class T>
T adaptive_weight(const T& outputs, const TimParamsT<T>& p) {
  return sigmoid(mlp2(outputs, p.weight_mlp, Activation::relu));
}

/// Ô = fuse_mlp([W ⊙ O^t, O^{t-1}]); the previous output enters unweighted.
template <class T>
T aggregate(const T& outputs, const T& prev_outputs, const TimParamsT<T>& p) {
  if (rows(outputs) != rows(prev_outputs) || cols(outputs) != cols(prev_outputs)) {
    throw ShapeError("aggregate: O^t and O^{t-1} shapes differ");
  }
  const T weighted = mul(adaptive_weight(outputs, p), outputs);
  const T parts[] = {weighted, prev_outputs};
  return mlp2(concat_cols(std::span<const T>(parts)), p.fuse_mlp, Activation::relu);
}

template <class T>
TimOutputT<T> tim_forward(const T& outputs, const T& prev_outputs, const T& memories,
                          const TimParamsT<T>& p, const TimOptions& options) {
  if (rows(memories) != rows(outputs) || cols(memories) != cols(outputs)) {
    throw ShapeError("tim_forward: memory rows do not match outputs");
  }
  T fused_input;
  switch (options.variant) {
    case TimVariant::full: {
      const T agg = aggregate(outputs, prev_outputs, p);
      fused_input = add(memories, mha(agg, memories, outputs, p.attn));
      break;
    }
    case TimVariant::memory_off: {
      const T agg = aggregate(outputs, prev_outputs, p);
      fused_input = mha(agg, agg, outputs, p.attn);
      break;
    }
    case TimVariant::attn_off:
      fused_input = add(memories, aggregate(outputs, prev_outputs, p));
      break;
    case TimVariant::naive:
      fused_input = outputs;
      break;
  }
  T next = mlp2(fused_input, p.ffn, Activation::relu);
  if (options.ffn_residual) next = add(next, fused_input);
  return {next, ema_update_rows(memories, outputs, options.lambda)};
}

TimOutput tim_forward(const TrackBatch& batch, const TimParams& p, const TimOptions& options);

}  // namespace memotr

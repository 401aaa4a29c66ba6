#include "memotr/tim.hpp"

namespace memotr {

std::string to_string(TimVariant v) {
  switch (v) {
    case TimVariant::full:
      return "full";
    case TimVariant::memory_off:
      return "memory-off";
    case TimVariant::attn_off:
      return "attn-off";
    case TimVariant::naive:
      return "naive";
  }
  return "full";
}

TimVariant parse_tim_variant(const std::string& name) {
  if (name == "full") return TimVariant::full;
  if (name == "memory-off") return TimVariant::memory_off;
  if (name == "attn-off") return TimVariant::attn_off;
  if (name == "naive") return TimVariant::naive;
  throw UsageError("unknown variant '" + name + "' (expected full, memory-off, attn-off, naive)");
}

void TrackBatch::validate(std::size_t width) const {
  const std::size_t n = outputs.rows();
  for (const Tensor2* m : {&outputs, &prev_outputs, &memories}) {
    if (m->rows() != n) throw ShapeError("TrackBatch: row counts differ");
    if (m->cols() != width && n > 0) throw ShapeError("TrackBatch: width mismatch");
  }
  if (!ids.empty() && ids.size() != n) throw ShapeError("TrackBatch: ids not aligned with rows");
}

void validate(const TimParams& p, std::size_t width) {
  memotr::validate(p.weight_mlp);
  memotr::validate(p.fuse_mlp);
  memotr::validate(p.attn);
  memotr::validate(p.ffn);
  if (p.weight_mlp.in_width() != width || p.weight_mlp.out_width() != width) {
    throw ShapeError("tim: weight_mlp must map d -> d");
  }
  if (p.fuse_mlp.in_width() != 2 * width || p.fuse_mlp.out_width() != width) {
    throw ShapeError("tim: fuse_mlp must map 2d -> d");
  }
  if (p.attn.width() != width) throw ShapeError("tim: attention width mismatch");
  if (p.ffn.in_width() != width || p.ffn.out_width() != width) {
    throw ShapeError("tim: ffn must map d -> d");
  }
}

TimParamsT<Var> lift(Tape& tape, const TimParams& p) {
  return {lift(tape, p.weight_mlp), lift(tape, p.fuse_mlp), lift(tape, p.attn), lift(tape, p.ffn)};
}

TimOutput tim_forward(const TrackBatch& batch, const TimParams& p, const TimOptions& options) {
  const std::size_t d = p.ffn.in_width();
  batch.validate(d);
  if (batch.size() == 0) return {Tensor2(0, d), Tensor2(0, d)};
  return tim_forward(batch.outputs, batch.prev_outputs, batch.memories, p, options);
}

}  // namespace memotr

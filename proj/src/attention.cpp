#include "memotr/attention.hpp"

namespace memotr {

void validate(const AttentionParams& p) {
  const std::size_t d = p.wq.rows();
  for (const Tensor2* w : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    if (w->rows() != d || w->cols() != d) throw ShapeError("attention: projections must be d x d");
  }
  if (p.heads == 0 || d % p.heads != 0) throw ShapeError("attention: d not divisible by heads");
}

void validate(const MlpParams& p) {
  if (p.w1.cols() == 0) throw ShapeError("mlp: hidden width must be positive");
  if (p.w1.cols() != p.w2.rows() || p.b1.rows() != 1 || p.b1.cols() != p.w1.cols() ||
      p.b2.rows() != 1 || p.b2.cols() != p.w2.cols()) {
    throw ShapeError("mlp: inconsistent layer shapes");
  }
}

AttentionParams identity_attention(std::size_t width, std::size_t heads) {
  const Tensor2 eye = Tensor2::identity(width);
  AttentionParams p{eye, eye, eye, eye, heads};
  validate(p);
  return p;
}

MlpParams zero_mlp(std::size_t in, std::size_t hidden, std::size_t out) {
  return MlpParams{Tensor2(in, hidden), Tensor2(1, hidden), Tensor2(hidden, out), Tensor2(1, out)};
}

AttentionParamsT<Var> lift(Tape& tape, const AttentionParams& p) {
  return {tape.variable(p.wq), tape.variable(p.wk), tape.variable(p.wv), tape.variable(p.wo),
          p.heads};
}

MlpParamsT<Var> lift(Tape& tape, const MlpParams& p) {
  return {tape.variable(p.w1), tape.variable(p.b1), tape.variable(p.w2), tape.variable(p.b2)};
}

}  // namespace memotr

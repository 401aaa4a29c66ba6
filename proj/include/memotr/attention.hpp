#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "memotr/linalg.hpp"

namespace memotr {

/// Multi-head attention weights, concatenated-head convention: each of the
/// d×d projections is split column-wise into `heads` blocks of width d/heads.
template <class T>
struct AttentionParamsT {
  T wq;
  T wk;
  T wv;
  T wo;
  std::size_t heads = 1;

  std::size_t width() const { return rows(wq); }
};

/// layer2(act(layer1(x))). Biases are 1×width row vectors.
template <class T>
struct MlpParamsT {
  T w1;
  T b1;
  T w2;
  T b2;

  std::size_t in_width() const { return rows(w1); }
  std::size_t hidden_width() const { return cols(w1); }
  std::size_t out_width() const { return cols(w2); }
};

using AttentionParams = AttentionParamsT<Tensor2>;
using MlpParams = MlpParamsT<Tensor2>;

enum class Activation { relu, none };

void validate(const AttentionParams& p);
void validate(const MlpParams& p);

AttentionParams identity_attention(std::size_t width, std::size_t heads);
MlpParams zero_mlp(std::size_t in, std::size_t hidden, std::size_t out);

AttentionParamsT<Var> lift(Tape& tape, const AttentionParams& p);
MlpParamsT<Var> lift(Tape& tape, const MlpParams& p);

/// Multi-head scaled dot-product attention. Logits are scaled by
/// 1/sqrt(d/heads). An empty key/value set yields a zero matrix shaped like
/// the output, so frames without tracked targets go through unchanged.
template <class T>
T mha(const T& q, const T& k, const T& v, const AttentionParamsT<T>& p) {
  const std::size_t d = rows(p.wq);
  if (p.heads == 0 || d % p.heads != 0) throw ShapeError("mha: width not divisible by heads");
  if (cols(q) != d || cols(k) != d || cols(v) != d) throw ShapeError("mha: input width mismatch");
  if (rows(k) != rows(v)) throw ShapeError("mha: key/value row mismatch");
  if (rows(k) == 0) return make_constant(q, Tensor2(rows(q), cols(p.wo)));

  const std::size_t dh = d / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const T qp = matmul(q, p.wq);
  const T kp = matmul(k, p.wk);
  const T vp = matmul(v, p.wv);

  std::vector<T> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const T qh = slice_cols(qp, h * dh, dh);
    const T kh = slice_cols(kp, h * dh, dh);
    const T vh = slice_cols(vp, h * dh, dh);
    const T weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    heads.push_back(matmul(weights, vh));
  }
  const T joined = p.heads == 1 ? heads.front() : concat_cols(std::span<const T>(heads));
  return matmul(joined, p.wo);
}

template <class T>
T mlp2(const T& x, const MlpParamsT<T>& p, Activation activation) {
  if (cols(x) != rows(p.w1) || cols(p.w1) != rows(p.w2) || cols(p.b1) != cols(p.w1) ||
      cols(p.b2) != cols(p.w2)) {
    throw ShapeError("mlp2: shape mismatch");
  }
  T hidden = add(matmul(x, p.w1), p.b1);
  if (activation == Activation::relu) hidden = relu(hidden);
  return add(matmul(hidden, p.w2), p.b2);
}

}  // namespace memotr

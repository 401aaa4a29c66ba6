#include "memotr/layout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace memotr {

TokenLayout TokenLayout::for_width(std::size_t width) {
  if (width < 32 || width % 2 != 0) {
    throw ShapeError("token layout needs an even width >= 32, got " + std::to_string(width));
  }
  TokenLayout l;
  l.width = width;
  l.signature_dim = width / 2;
  std::size_t c = l.signature_dim;
  l.pos_x = c++;
  l.pos_y = c++;
  l.box_begin = c;
  c += 4;
  l.objectness = c++;
  l.anchor_x = c++;
  l.anchor_y = c++;
  l.det_flag = c++;
  l.track_flag = c++;
  l.null_flag = c++;
  l.pe_begin = c;
  l.pe_freqs = std::min<std::size_t>(4, (width - c) / 4);
  return l;
}

double TokenLayout::pe_frequency(std::size_t k) const {
  return 0.5 * std::numbers::pi * std::ldexp(1.0, static_cast<int>(k));
}

Tensor2 position_encoding(const Tensor2& positions, const TokenLayout& layout) {
  if (positions.rows() > 0 && positions.cols() != 2) throw ShapeError("positions must be N x 2");
  Tensor2 out(positions.rows(), layout.width);
  for (std::size_t r = 0; r < positions.rows(); ++r) {
    const double x = positions(r, 0);
    const double y = positions(r, 1);
    for (std::size_t k = 0; k < layout.pe_freqs; ++k) {
      const double w = layout.pe_frequency(k);
      const std::size_t c = layout.pe_begin + 4 * k;
      out(r, c) = std::sin(w * x);
      out(r, c + 1) = std::cos(w * x);
      out(r, c + 2) = std::sin(w * y);
      out(r, c + 3) = std::cos(w * y);
    }
  }
  return out;
}

double logit(double p) {
  const double q = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(q / (1.0 - q));
}

}  // namespace memotr

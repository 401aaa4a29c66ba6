#pragma once

#include <cstddef>
#include <span>

#include "memotr/geometry.hpp"
#include "memotr/linalg.hpp"

namespace memotr {

/// Channel map shared by the scenario generator (which writes tokens) and the
/// structured parameter builder (which reads them).
///
///   [0, d/2)          identity signature
///   pos_x, pos_y      raw box centre
///   box_begin .. +4   logit(cx), logit(cy), logit(w), logit(h)
///   objectness        1 for target tokens, 0 for background
///   anchor_x/y        query anchor (detect queries only)
///   det_flag          1 on detect-query rows
///   track_flag        1 on track-embedding rows
///   null_flag         1 on the decoder's null key
///   pe_begin ..       sinusoidal position encoding, 4 channels per frequency
struct TokenLayout {
  std::size_t width = 0;
  std::size_t signature_dim = 0;
  std::size_t pos_x = 0;
  std::size_t pos_y = 0;
  std::size_t box_begin = 0;
  std::size_t objectness = 0;
  std::size_t anchor_x = 0;
  std::size_t anchor_y = 0;
  std::size_t det_flag = 0;
  std::size_t track_flag = 0;
  std::size_t null_flag = 0;
  std::size_t pe_begin = 0;
  std::size_t pe_freqs = 0;

  /// Requires width >= 32 and even.
  static TokenLayout for_width(std::size_t width);

  double pe_frequency(std::size_t k) const;
};

/// N×width matrix holding only the sinusoidal encodings of `positions`
/// (N×2, normalized coordinates) in the layout's position-encoding channels.
Tensor2 position_encoding(const Tensor2& positions, const TokenLayout& layout);

double logit(double p);

}  // namespace memotr

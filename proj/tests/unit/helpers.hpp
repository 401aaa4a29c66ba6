#pragma once

#include <algorithm>
#include <cmath>

#include "memotr/linalg.hpp"
#include "memotr/rng.hpp"

namespace testing {

inline memotr::Tensor2 uniform(memotr::Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  memotr::Tensor2 t(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const memotr::Tensor2& a, const memotr::Tensor2& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace testing

#include "memotr/geometry.hpp"

#include <algorithm>

namespace memotr {

namespace {

double intersection(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

// Areas from the same edges as the intersection, so identical boxes give 1 exactly.
double edge_area(const BoundingBox& b) { return (b.right() - b.left()) * (b.bottom() - b.top()); }

}  // namespace

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection(a, b);
  const double uni = edge_area(a) + edge_area(b) - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double coverage(const BoundingBox& rear, const BoundingBox& front) {
  const double area = rear.area();
  if (!(area > 0.0)) return 0.0;
  return std::clamp(intersection(rear, front) / area, 0.0, 1.0);
}

}  // namespace memotr

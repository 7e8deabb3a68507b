// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>

namespace shtrack {

/// Axis-aligned box, corner based: (x, y) is the top-left corner in
/// continuous pixel coordinates.
struct BBox {
  double x{0.0};
  double y{0.0};
  double w{0.0};
  double h{0.0};

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }

  bool valid() const { return w >= 0.0 && h >= 0.0; }

  BBox translated(double dx, double dy) const { return {x + dx, y + dy, w, h}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

/// Intersection over union; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Fraction of `inner` covered by `outer`; 0 for a zero-area inner box.
inline double containment_ratio(const BBox& inner, const BBox& outer) {
  const double a = inner.area();
  if (a <= 0.0) return 0.0;
  return intersection_area(inner, outer) / a;
}

}  // namespace shtrack

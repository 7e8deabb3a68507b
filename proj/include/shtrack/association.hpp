// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "shtrack/assignment.hpp"
#include "shtrack/geometry.hpp"

namespace shtrack {

/// Appearance embedding from an external re-identification model.
struct Embedding {
  std::vector<double> values;
  bool normalized = false;

  std::size_t dim() const { return values.size(); }
};

/// L2-normalizes in place. Throws on non-finite entries or a zero vector.
inline void normalize(Embedding& e) {
  double sq = 0.0;
  for (double x : e.values) {
    if (!std::isfinite(x)) throw std::invalid_argument("embedding: non-finite value");
    sq += x * x;
  }
  if (sq <= 0.0) throw std::invalid_argument("embedding: zero vector cannot be normalized");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : e.values) x *= inv;
  e.normalized = true;
}

inline Embedding normalized(Embedding e) {
  normalize(e);
  return e;
}

/// One accepted observation of a track.
struct Observation {
  int frame = 0;
  BBox box;
};

struct AssociationWeights {
  double iou_gate = 0.3;
  double lambda_ocm = 0.2;
  double lambda_app = 0.5;
  double w_aw = 0.5;
};

/// 1 - IoU for every (track, detection) pair; pairs below the gate are forbidden.
inline CostMatrix iou_cost(std::span<const BBox> tracks, std::span<const BBox> dets,
                           double gate) {
  CostMatrix c(static_cast<int>(tracks.size()), static_cast<int>(dets.size()));
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) {
      const double v = iou(tracks[i], dets[j]);
      c.at(i, j) = 1.0 - v;
      if (v < gate || v <= 0.0) c.set_forbidden(i, j);
    }
  return c;
}

namespace detail {

inline constexpr double kMinDirectionNorm = 1e-6;

// Observation `delta_t` frames before the latest one, or the nearest
// available substitute when the history has gaps or is short.
inline const Observation& momentum_anchor(std::span<const Observation> history, int delta_t) {
  const Observation& last = history.back();
  const int target = last.frame - delta_t;
  // Earliest observation inside [target, last); otherwise the newest one
  // older than target.
  const Observation* inside = nullptr;
  const Observation* older = nullptr;
  for (const auto& o : history) {
    if (o.frame >= last.frame) continue;
    if (o.frame >= target) {
      if (inside == nullptr || o.frame < inside->frame) inside = &o;
    } else if (older == nullptr || o.frame > older->frame) {
      older = &o;
    }
  }
  if (inside != nullptr) return *inside;
  if (older != nullptr) return *older;
  return last;
}

}  // namespace detail

/**
 * Direction-consistency cost: angle in [0, pi] between the track's
 * historical motion (centers, `delta_t` frames back to the latest
 * observation) and the motion from the latest observation to `det`.
 * Zero when the track has fewer than two observations or either
 * direction is degenerate. `history` is ordered by frame.
 */
inline double ocm_cost(std::span<const Observation> history, const BBox& det, int delta_t) {
  if (history.size() < 2) return 0.0;
  const Observation& last = history.back();
  const Observation& anchor = detail::momentum_anchor(history, delta_t);
  const double hx = last.box.cx() - anchor.box.cx();
  const double hy = last.box.cy() - anchor.box.cy();
  const double nx = det.cx() - last.box.cx();
  const double ny = det.cy() - last.box.cy();
  const double hn = std::hypot(hx, hy);
  const double nn = std::hypot(nx, ny);
  if (hn < detail::kMinDirectionNorm || nn < detail::kMinDirectionNorm) return 0.0;
  const double cosang = std::clamp((hx * nx + hy * ny) / (hn * nn), -1.0, 1.0);
  return std::acos(cosang);
}

/// Cosine similarity of two normalized embeddings; neutral (0) when
/// either side is missing.
inline double appearance_cost(const std::optional<Embedding>& track_emb,
                              const std::optional<Embedding>& det_emb) {
  if (!track_emb || !det_emb) return 0.0;
  if (track_emb->dim() != det_emb->dim()) {
    throw std::invalid_argument("appearance_cost: embedding dimension mismatch");
  }
  double dot = 0.0;
  for (std::size_t k = 0; k < track_emb->dim(); ++k) dot += track_emb->values[k] * det_emb->values[k];
  return std::clamp(dot, -1.0, 1.0);
}

inline CostMatrix similarity_matrix(std::span<const std::optional<Embedding>> tracks,
                                    std::span<const std::optional<Embedding>> dets) {
  CostMatrix s(static_cast<int>(tracks.size()), static_cast<int>(dets.size()));
  for (int i = 0; i < s.rows(); ++i)
    for (int j = 0; j < s.cols(); ++j) s.at(i, j) = appearance_cost(tracks[i], dets[j]);
  return s;
}

struct Boosts {
  std::vector<double> rows;
  std::vector<double> cols;
};

namespace detail {

template <typename Get>
double top_two_gap(int n, Get get) {
  if (n < 2) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  double second = best;
  for (int k = 0; k < n; ++k) {
    const double v = get(k);
    if (v > best) {
      second = best;
      best = v;
    } else if (v > second) {
      second = v;
    }
  }
  return best - second;
}

}  // namespace detail

/// Per-row and per-column appearance weight boosts: w_aw times the gap
/// between the best and second-best similarity in that row/column.
inline Boosts adaptive_boosts(const CostMatrix& sim, double w_aw) {
  Boosts b{std::vector<double>(sim.rows(), 0.0), std::vector<double>(sim.cols(), 0.0)};
  for (int i = 0; i < sim.rows(); ++i)
    b.rows[i] = w_aw * detail::top_two_gap(sim.cols(), [&](int j) { return sim.at(i, j); });
  for (int j = 0; j < sim.cols(); ++j)
    b.cols[j] = w_aw * detail::top_two_gap(sim.rows(), [&](int i) { return sim.at(i, j); });
  return b;
}

/// C = iou_cost + lambda_ocm * angle - (lambda_app + boost_row + boost_col) * sim.
/// The gate mask of `iou_c` carries over.
inline CostMatrix fuse_costs(const CostMatrix& iou_c, const CostMatrix& angle,
                             const CostMatrix& sim, const AssociationWeights& w) {
  if (!iou_c.same_shape(angle) || !iou_c.same_shape(sim)) {
    throw std::invalid_argument("fuse_costs: matrix shape mismatch");
  }
  const Boosts boost = adaptive_boosts(sim, w.w_aw);
  CostMatrix c = iou_c;
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) {
      const double app_w = w.lambda_app + boost.rows[i] + boost.cols[j];
      c.at(i, j) = iou_c.at(i, j) + w.lambda_ocm * angle.at(i, j) - app_w * sim.at(i, j);
    }
  return c;
}

}  // namespace shtrack

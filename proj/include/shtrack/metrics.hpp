// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shtrack/assignment.hpp"
#include "shtrack/geometry.hpp"
#include "shtrack/tracker.hpp"

namespace shtrack {

/// Ground-truth box; frame is 0-based.
struct GtBox {
  int frame = 0;
  int id = 0;
  ClassId cls = ClassId::Shooter;
  BBox bbox;
};

/// One row of tracker output; frame is 0-based.
struct TrackRecord {
  int frame = 0;
  int id = 0;
  ClassId cls = ClassId::Shooter;
  BBox bbox;
  double confidence = 1.0;
  bool confirmed = true;

  friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

struct MotCounts {
  std::int64_t matched = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t idsw = 0;
  std::int64_t num_gt = 0;
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;
};

/// Ratios are empty when their denominator is zero.
struct MetricsReport {
  std::optional<double> mota;
  std::optional<double> idf1;
  std::optional<double> idp;
  std::optional<double> idr;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct IdCounts {
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;
};

struct Evaluation {
  MotCounts counts;
  MetricsReport report;
};

struct WindowedReport {
  int window = 1;  // effective (odd) window
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

namespace detail {

inline std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

struct IdBox {
  int id;
  BBox bbox;
};

using FrameIndex = std::map<int, std::vector<IdBox>>;

template <typename Box>
FrameIndex index_shooters(std::span<const Box> boxes, const char* what) {
  FrameIndex out;
  for (const auto& b : boxes) {
    if (b.cls != ClassId::Shooter) continue;
    auto& v = out[b.frame];
    for (const auto& e : v) {
      if (e.id == b.id) {
        throw std::invalid_argument(std::string(what) + ": duplicate id " + std::to_string(b.id) +
                                    " in frame " + std::to_string(b.frame + 1));
      }
    }
    v.push_back({b.id, b.bbox});
  }
  return out;
}

inline const std::vector<IdBox>& at_frame(const FrameIndex& idx, int frame) {
  static const std::vector<IdBox> empty;
  const auto it = idx.find(frame);
  return it == idx.end() ? empty : it->second;
}

inline std::set<int> all_frames(const FrameIndex& a, const FrameIndex& b) {
  std::set<int> f;
  for (const auto& [k, _] : a) f.insert(k);
  for (const auto& [k, _] : b) f.insert(k);
  return f;
}

}  // namespace detail

/// Fills the ratio fields from counts.
inline MetricsReport make_report(const MotCounts& c) {
  MetricsReport r;
  if (c.num_gt > 0) {
    r.mota = 1.0 - static_cast<double>(c.fp + c.fn + c.idsw) / static_cast<double>(c.num_gt);
  }
  r.precision = detail::ratio(static_cast<double>(c.matched), static_cast<double>(c.matched + c.fp));
  r.recall = detail::ratio(static_cast<double>(c.matched), static_cast<double>(c.num_gt));
  r.idp = detail::ratio(static_cast<double>(c.idtp), static_cast<double>(c.idtp + c.idfp));
  r.idr = detail::ratio(static_cast<double>(c.idtp), static_cast<double>(c.idtp + c.idfn));
  r.idf1 = detail::ratio(2.0 * static_cast<double>(c.idtp),
                         static_cast<double>(2 * c.idtp + c.idfp + c.idfn));
  return r;
}

/**
 * CLEAR-MOT accounting over shooter-class boxes. Per frame, GT/prediction
 * pairs matched in the previous frame that still reach `iou_thresh` are
 * kept; the rest are matched by minimum-cost assignment on 1 - IoU. An ID
 * switch is counted whenever a GT id is matched to a prediction id other
 * than the one it was last matched to.
 */
inline MotCounts compute_clear(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                               double iou_thresh = 0.5) {
  const auto g_idx = detail::index_shooters(gt, "ground truth");
  const auto p_idx = detail::index_shooters(pred, "tracks");

  MotCounts c;
  std::map<int, int> last_match;  // gt id -> pred id, ever
  std::map<int, int> prev_pairs;  // gt id -> pred id, previous frame only
  int prev_frame = -2;
  for (int f : detail::all_frames(g_idx, p_idx)) {
    const auto& gs = detail::at_frame(g_idx, f);
    const auto& ps = detail::at_frame(p_idx, f);
    if (f != prev_frame + 1) prev_pairs.clear();

    std::vector<char> g_used(gs.size(), 0), p_used(ps.size(), 0);
    std::vector<std::pair<int, int>> frame_matches;  // indices into gs / ps
    for (std::size_t i = 0; i < gs.size(); ++i) {
      const auto it = prev_pairs.find(gs[i].id);
      if (it == prev_pairs.end()) continue;
      for (std::size_t j = 0; j < ps.size(); ++j) {
        if (p_used[j] || ps[j].id != it->second) continue;
        if (iou(gs[i].bbox, ps[j].bbox) >= iou_thresh) {
          g_used[i] = p_used[j] = 1;
          frame_matches.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
        break;
      }
    }

    std::vector<int> rows, cols;
    for (std::size_t i = 0; i < gs.size(); ++i)
      if (!g_used[i]) rows.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < ps.size(); ++j)
      if (!p_used[j]) cols.push_back(static_cast<int>(j));
    CostMatrix cost(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
    for (int r = 0; r < cost.rows(); ++r)
      for (int k = 0; k < cost.cols(); ++k) {
        const double v = iou(gs[rows[r]].bbox, ps[cols[k]].bbox);
        cost.at(r, k) = 1.0 - v;
        if (v < iou_thresh) cost.set_forbidden(r, k);
      }
    for (const auto& [r, k] : solve_assignment(cost).matches) frame_matches.emplace_back(rows[r], cols[k]);

    prev_pairs.clear();
    for (const auto& [i, j] : frame_matches) {
      const int gid = gs[i].id;
      const int pid = ps[j].id;
      const auto it = last_match.find(gid);
      if (it != last_match.end() && it->second != pid) ++c.idsw;
      last_match[gid] = pid;
      prev_pairs[gid] = pid;
    }
    const auto n = static_cast<std::int64_t>(frame_matches.size());
    c.matched += n;
    c.fp += static_cast<std::int64_t>(ps.size()) - n;
    c.fn += static_cast<std::int64_t>(gs.size()) - n;
    c.num_gt += static_cast<std::int64_t>(gs.size());
    prev_frame = f;
  }
  return c;
}

/// Per-identity frame counts and pairwise co-match counts used by the
/// identity metrics.
struct IdentityTable {
  std::vector<int> gt_ids;
  std::vector<int> pred_ids;
  std::vector<std::int64_t> gt_len;
  std::vector<std::int64_t> pred_len;
  std::vector<std::vector<std::int64_t>> matches;  // [gt][pred] frames with IoU >= thresh
};

inline IdentityTable build_identity_table(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                                          double iou_thresh = 0.5) {
  const auto g_idx = detail::index_shooters(gt, "ground truth");
  const auto p_idx = detail::index_shooters(pred, "tracks");
  IdentityTable t;
  std::map<int, int> g_pos, p_pos;
  for (const auto& [f, v] : g_idx)
    for (const auto& b : v) g_pos.emplace(b.id, 0);
  for (const auto& [f, v] : p_idx)
    for (const auto& b : v) p_pos.emplace(b.id, 0);
  for (auto& [id, pos] : g_pos) {
    pos = static_cast<int>(t.gt_ids.size());
    t.gt_ids.push_back(id);
  }
  for (auto& [id, pos] : p_pos) {
    pos = static_cast<int>(t.pred_ids.size());
    t.pred_ids.push_back(id);
  }
  t.gt_len.assign(t.gt_ids.size(), 0);
  t.pred_len.assign(t.pred_ids.size(), 0);
  t.matches.assign(t.gt_ids.size(), std::vector<std::int64_t>(t.pred_ids.size(), 0));
  for (const auto& [f, v] : g_idx)
    for (const auto& b : v) ++t.gt_len[g_pos[b.id]];
  for (const auto& [f, v] : p_idx)
    for (const auto& b : v) ++t.pred_len[p_pos[b.id]];
  for (const auto& [f, gs] : g_idx) {
    const auto& ps = detail::at_frame(p_idx, f);
    for (const auto& g : gs)
      for (const auto& p : ps)
        if (iou(g.bbox, p.bbox) >= iou_thresh) ++t.matches[g_pos[g.id]][p_pos[p.id]];
  }
  return t;
}

/**
 * Identity metrics: global minimum-cost pairing of GT and predicted
 * trajectories, where pairing g with p costs the frames either side is
 * left unmatched, and dummy partners absorb unpaired trajectories.
 */
inline IdCounts solve_identity(const IdentityTable& t) {
  const int ng = static_cast<int>(t.gt_ids.size());
  const int np = static_cast<int>(t.pred_ids.size());
  std::int64_t total_gt = 0, total_pred = 0;
  for (auto v : t.gt_len) total_gt += v;
  for (auto v : t.pred_len) total_pred += v;

  const int n = ng + np;
  CostMatrix cost(n, n, 0.0);
  for (int g = 0; g < ng; ++g)
    for (int p = 0; p < np; ++p)
      cost.at(g, p) = static_cast<double>(t.gt_len[g] + t.pred_len[p] - 2 * t.matches[g][p]);
  for (int g = 0; g < ng; ++g)
    for (int k = 0; k < ng; ++k) {
      if (k == g) cost.at(g, np + k) = static_cast<double>(t.gt_len[g]);
      else cost.set_forbidden(g, np + k);
    }
  for (int k = 0; k < np; ++k)
    for (int p = 0; p < np; ++p) {
      if (k == p) cost.at(ng + k, p) = static_cast<double>(t.pred_len[p]);
      else cost.set_forbidden(ng + k, p);
    }

  std::int64_t idtp = 0;
  for (const auto& [r, col] : solve_assignment(cost).matches)
    if (r < ng && col < np) idtp += t.matches[r][col];
  return {idtp, total_pred - idtp, total_gt - idtp};
}

inline IdCounts compute_id_metrics(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                                   double iou_thresh = 0.5) {
  return solve_identity(build_identity_table(gt, pred, iou_thresh));
}

inline Evaluation evaluate(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                           double iou_thresh = 0.5) {
  Evaluation e;
  e.counts = compute_clear(gt, pred, iou_thresh);
  const IdCounts id = compute_id_metrics(gt, pred, iou_thresh);
  e.counts.idtp = id.idtp;
  e.counts.idfp = id.idfp;
  e.counts.idfn = id.idfn;
  e.report = make_report(e.counts);
  return e;
}

inline int effective_window(int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  return window % 2 == 0 ? window + 1 : window;
}

/**
 * Windowed system-level precision/recall. A GT box at frame t counts as
 * covered if any predicted box within the centered window around t
 * reaches `iou_thresh` against it; a predicted box is valid under the
 * mirror rule. Identities are ignored. Even windows round up to odd.
 */
inline WindowedReport windowed_prf(std::span<const GtBox> gt, std::span<const TrackRecord> pred,
                                   int window, double iou_thresh = 0.5) {
  WindowedReport r;
  r.window = effective_window(window);
  const int half = r.window / 2;

  std::map<int, std::vector<BBox>> g_by, p_by;
  std::int64_t n_gt = 0, n_pred = 0;
  for (const auto& g : gt)
    if (g.cls == ClassId::Shooter) {
      g_by[g.frame].push_back(g.bbox);
      ++n_gt;
    }
  for (const auto& p : pred)
    if (p.cls == ClassId::Shooter) {
      p_by[p.frame].push_back(p.bbox);
      ++n_pred;
    }

  auto any_hit = [&](const std::map<int, std::vector<BBox>>& other, int frame, const BBox& box) {
    for (auto it = other.lower_bound(frame - half); it != other.end() && it->first <= frame + half; ++it)
      for (const auto& o : it->second)
        if (iou(box, o) >= iou_thresh) return true;
    return false;
  };

  std::int64_t covered = 0, valid = 0;
  for (const auto& [f, boxes] : g_by)
    for (const auto& b : boxes) covered += any_hit(p_by, f, b) ? 1 : 0;
  for (const auto& [f, boxes] : p_by)
    for (const auto& b : boxes) valid += any_hit(g_by, f, b) ? 1 : 0;

  r.precision = n_pred > 0 ? static_cast<double>(valid) / static_cast<double>(n_pred) : 0.0;
  r.recall = n_gt > 0 ? static_cast<double>(covered) / static_cast<double>(n_gt) : 0.0;
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

/// Flattens tracker frame results into output records.
inline std::vector<TrackRecord> to_records(std::span<const FrameResult> frames) {
  std::vector<TrackRecord> out;
  for (const auto& fr : frames)
    for (const auto& e : fr.entries)
      out.push_back({fr.frame, e.track_id, ClassId::Shooter, e.bbox, e.confidence, e.shooter_confirmed});
  return out;
}

/// Ground truth viewed as a perfect tracker output.
inline std::vector<TrackRecord> as_predictions(std::span<const GtBox> gt) {
  std::vector<TrackRecord> out;
  out.reserve(gt.size());
  for (const auto& g : gt) out.push_back({g.frame, g.id, g.cls, g.bbox, 1.0, true});
  return out;
}

}  // namespace shtrack

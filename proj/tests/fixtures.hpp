// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

// Scene builders shared by the unit suites and the acceptance binary.

#pragma once

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "shtrack/assignment.hpp"
#include "shtrack/metrics.hpp"
#include "shtrack/synthdata.hpp"
#include "shtrack/tracker.hpp"

namespace fixture {

using namespace shtrack;

inline std::filesystem::path data_dir() { return SHTRACK_TEST_DATA; }

inline Detection shooter(int frame, BBox b, double conf = 0.7) { return {frame, ClassId::Shooter, b, conf, {}}; }
inline Detection gun(int frame, BBox b, double conf = 0.9) { return {frame, ClassId::Gun, b, conf, {}}; }

/// A shooter standing at `box` for `frames` frames; a gun inside the box on
/// each frame listed in `gun_frames`.
inline std::vector<Detection> stationary_scene(int frames, const std::set<int>& gun_frames,
                                               BBox box = {100, 100, 40, 80}, double shooter_conf = 0.6,
                                               double gun_conf = 0.8) {
  std::vector<Detection> d;
  for (int f = 0; f < frames; ++f) {
    d.push_back(shooter(f, box, shooter_conf));
    if (gun_frames.count(f)) d.push_back(gun(f, {box.x + 25, box.y + 30, 12, 8}, gun_conf));
  }
  return d;
}

/// Same shooter seen on frames [0, before) and [before + gap, before + gap + after).
inline std::vector<Detection> gap_scene(int before, int gap, int after) {
  std::vector<Detection> d;
  const BBox box{100, 100, 40, 80};
  for (int f = 0; f < before + gap + after; ++f) {
    if (f >= before && f < before + gap) continue;
    d.push_back(shooter(f, box, 0.7));
    if (f == 0 || f == before + gap) d.push_back(gun(f, {125, 130, 12, 8}, 0.9));
  }
  return d;
}

/// Shooter walks right 5 px/frame for `before` frames, vanishes for `gap`
/// frames, then stands at its last seen position. Guns confirm it on the
/// first frame and again on reappearance, so a dropped track would be
/// re-initialized under a new id.
inline std::vector<Detection> occlusion_scene(int before = 10, int gap = 10, int after = 10) {
  std::vector<Detection> d;
  BBox box{100, 100, 40, 80};
  for (int f = 0; f < before; ++f) {
    box = BBox{100.0 + 5.0 * f, 100, 40, 80};
    d.push_back(shooter(f, box, 0.7));
    if (f == 0) d.push_back(gun(f, {box.x + 25, box.y + 30, 12, 8}, 0.9));
  }
  for (int f = before + gap; f < before + gap + after; ++f) {
    d.push_back(shooter(f, box, 0.7));
    if (f == before + gap) d.push_back(gun(f, {box.x + 25, box.y + 30, 12, 8}, 0.9));
  }
  return d;
}

/// Several walkers with jitter, dropouts, random confidences, occasional
/// guns and spurious shooter boxes. Sorted by frame.
inline std::vector<Detection> random_scene(std::mt19937_64& rng, int frames = 60, int walkers = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0), jit(-2.0, 2.0);
  std::vector<Detection> d;
  std::vector<BBox> pos(walkers);
  std::vector<double> vel(walkers);
  for (int k = 0; k < walkers; ++k) {
    pos[k] = {50.0 + 120.0 * k, 60.0 + 20.0 * u(rng), 40, 80};
    vel[k] = 4.0 * (u(rng) - 0.5);
  }
  for (int f = 0; f < frames; ++f) {
    for (int k = 0; k < walkers; ++k) {
      pos[k] = pos[k].translated(vel[k], 0.0);
      if (u(rng) < 0.15) continue;
      d.push_back(shooter(f, pos[k].translated(jit(rng), jit(rng)), 0.3 + 0.7 * u(rng)));
      if (u(rng) < 0.1) d.push_back(gun(f, {pos[k].x + 20, pos[k].y + 30, 12, 8}, 0.5 + 0.5 * u(rng)));
    }
    if (u(rng) < 0.2) d.push_back(shooter(f, {600 + 100 * u(rng), 300, 30, 60}, u(rng)));
  }
  return d;
}

inline std::vector<GtBox> gt_from(const std::vector<Detection>& dets, int id = 1) {
  std::vector<GtBox> gt;
  for (const auto& d : dets)
    if (d.cls == ClassId::Shooter) gt.push_back({d.frame, id, ClassId::Shooter, d.bbox});
  return gt;
}

inline std::set<int> distinct_ids(const std::vector<FrameResult>& frames) {
  std::set<int> ids;
  for (const auto& f : frames)
    for (const auto& e : f.entries) ids.insert(e.track_id);
  return ids;
}

inline std::size_t emitted_boxes(const std::vector<FrameResult>& frames) {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.entries.size();
  return n;
}

inline CostMatrix random_cost_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CostMatrix c(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) c.at(i, j) = u(rng);
  return c;
}

/// Random GT / prediction pair over a small slot grid so that exact
/// overlaps, partial overlaps and misses all occur. At most `max_gt` GT
/// identities and `max_pred` predicted identities.
struct IdFixture {
  std::vector<GtBox> gt;
  std::vector<TrackRecord> pred;
};

inline IdFixture random_id_fixture(std::mt19937_64& rng, int max_gt = 5, int max_pred = 5, int frames = 12) {
  std::uniform_int_distribution<int> ng(1, max_gt), np(1, max_pred), slot(0, 5), coin(0, 99);
  const int g = ng(rng);
  const int p = np(rng);
  IdFixture fx;
  for (int f = 0; f < frames; ++f) {
    std::set<int> used_pred;
    for (int id = 1; id <= g; ++id) {
      if (coin(rng) < 20) continue;
      const BBox b{id * 60.0, 0.0, 40.0, 40.0};
      fx.gt.push_back({f, id, ClassId::Shooter, b});
      if (coin(rng) < 25) continue;
      const int pid = 1 + static_cast<int>(rng() % static_cast<unsigned>(p));
      if (used_pred.count(pid)) continue;
      used_pred.insert(pid);
      // Mostly exact, sometimes shifted past the 0.5 IoU threshold.
      const double dx = coin(rng) < 80 ? 0.0 : 4.0 * slot(rng);
      fx.pred.push_back({f, pid, ClassId::Shooter, b.translated(dx, 0.0), 0.9, true});
    }
    for (int pid = 1; pid <= p; ++pid) {
      if (used_pred.count(pid) || coin(rng) < 70) continue;
      fx.pred.push_back({f, pid, ClassId::Shooter, {500.0 + 60.0 * slot(rng), 0.0, 40.0, 40.0}, 0.9, true});
    }
  }
  return fx;
}

/// Random detections with visible GT: targets every frame (slight jitter),
/// plus occasional dropouts and spurious boxes.
struct WindowFixture {
  std::vector<GtBox> gt;
  std::vector<TrackRecord> pred;
};

inline WindowFixture random_window_fixture(std::mt19937_64& rng, int frames = 30) {
  std::uniform_int_distribution<int> coin(0, 99);
  WindowFixture fx;
  for (int f = 0; f < frames; ++f) {
    for (int id = 1; id <= 3; ++id) {
      const BBox b{id * 100.0, 50.0, 40.0, 60.0};
      if (coin(rng) < 85) fx.gt.push_back({f, id, ClassId::Shooter, b});
      if (coin(rng) < 50) fx.pred.push_back({f, id, ClassId::Shooter, b.translated(coin(rng) % 10, 0), 0.9, true});
    }
    if (coin(rng) < 20) fx.pred.push_back({f, 9, ClassId::Shooter, {700, 50, 40, 60}, 0.9, true});
  }
  return fx;
}

/// Paints an axis-aligned rectangle of `color` into a mask.
inline void paint(ImageBuffer& img, int x, int y, int w, int h, Rgb8 color) {
  for (int yy = y; yy < y + h; ++yy)
    for (int xx = x; xx < x + w; ++xx) {
      img.at(xx, yy, 0) = color.r / 255.0;
      img.at(xx, yy, 1) = color.g / 255.0;
      img.at(xx, yy, 2) = color.b / 255.0;
    }
}

}  // namespace fixture

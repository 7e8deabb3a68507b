// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "shtrack/metrics.hpp"
#include "shtrack/tracker.hpp"

namespace shtrack {

enum class SweepMode { ShooterOnly, GunConfirmed };

inline std::string_view to_string(SweepMode m) {
  return m == SweepMode::ShooterOnly ? "shooter_only" : "gun_confirmed";
}

struct SweepRow {
  SweepMode mode = SweepMode::ShooterOnly;
  double gun_thresh = 0.0;
  double shooter_thresh = 0.0;
  Evaluation eval;
};

/// Threshold grid 0.1, 0.2, ..., 0.9.
inline std::vector<double> default_threshold_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 9; ++k) g.push_back(k / 10.0);
  return g;
}

/**
 * Tracks and evaluates every (mode, gun threshold, shooter threshold)
 * combination. Rows come back ordered by mode, then gun threshold, then
 * shooter threshold, independent of `jobs`.
 */
inline std::vector<SweepRow> sweep_thresholds(std::span<const Detection> dets, const EmbeddingTable* embs,
                                              std::span<const GtBox> gt, const TrackerConfig& base,
                                              std::span<const double> grid, int jobs = 1,
                                              double iou_thresh = 0.5, int num_frames = 0) {
  std::vector<SweepRow> rows;
  for (SweepMode mode : {SweepMode::ShooterOnly, SweepMode::GunConfirmed})
    for (double gt_thresh : grid)
      for (double st_thresh : grid) rows.push_back({mode, gt_thresh, st_thresh, {}});

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < rows.size(); k = next++) {
      try {
        SweepRow& row = rows[k];
        TrackerConfig cfg = base;
        cfg.gun_confirmation = row.mode == SweepMode::GunConfirmed;
        cfg.gun_conf_thresh = row.gun_thresh;
        cfg.shooter_conf_thresh = row.shooter_thresh;
        const auto frames = run_sequence(dets, embs, cfg, num_frames);
        const auto records = to_records(frames);
        row.eval = evaluate(gt, records, iou_thresh);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int n = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace shtrack

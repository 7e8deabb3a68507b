// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shtrack/assignment.hpp"
#include "shtrack/association.hpp"
#include "shtrack/geometry.hpp"
#include "shtrack/kalman.hpp"

namespace shtrack {

/// Detector classes. File encoding: Shooter = 0, Gun = 1.
enum class ClassId : int { Shooter = 0, Gun = 1 };

struct Detection {
  int frame = 0;  // 0-based
  ClassId cls = ClassId::Shooter;
  BBox bbox;
  double confidence = 0.0;
  std::optional<Embedding> embedding;
};

enum class GunOverlapMode { AnyOverlap, Containment };

struct TrackerConfig {
  double shooter_conf_thresh = 0.6;
  double gun_conf_thresh = 0.8;
  GunOverlapMode gun_overlap_mode = GunOverlapMode::AnyOverlap;
  double gun_containment_min = 0.5;
  double iou_gate = 0.3;
  double lambda_ocm = 0.2;
  double lambda_app = 0.5;
  double w_aw = 0.5;
  int delta_t = 3;
  double alpha_fixed = 0.95;  // EMA floor
  double conf_floor = 0.5;
  int max_age = 30;
  int min_hits = 1;
  // When false every unmatched shooter detection starts a track
  // ("shooter only" evaluation mode).
  bool gun_confirmation = true;
  bool use_ocr = true;
  KalmanNoise noise;

  AssociationWeights weights() const { return {iou_gate, lambda_ocm, lambda_app, w_aw}; }

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument(std::string("tracker config: ") + name + " must be in [0,1]");
      }
    };
    unit(shooter_conf_thresh, "shooter_conf_thresh");
    unit(gun_conf_thresh, "gun_conf_thresh");
    unit(gun_containment_min, "gun_containment_min");
    unit(iou_gate, "iou_gate");
    unit(alpha_fixed, "alpha_fixed");
    if (!(conf_floor >= 0.0 && conf_floor < 1.0)) {
      throw std::invalid_argument("tracker config: conf_floor must be in [0,1)");
    }
    if (max_age < 1) throw std::invalid_argument("tracker config: max_age must be >= 1");
    if (delta_t < 1) throw std::invalid_argument("tracker config: delta_t must be >= 1");
    if (min_hits < 1) throw std::invalid_argument("tracker config: min_hits must be >= 1");
  }
};

struct Track {
  int id = 0;
  KalmanState state;
  StateSnapshot snapshot;
  std::deque<Observation> history;  // accepted observations, oldest first
  std::optional<Embedding> ema_embedding;
  int hits = 0;
  int time_since_update = 0;
  bool shooter_confirmed = false;
  double last_confidence = 0.0;
};

struct TrackOutput {
  int track_id = 0;
  BBox bbox;
  double confidence = 0.0;
  bool shooter_confirmed = true;
};

struct FrameResult {
  int frame = 0;
  std::vector<TrackOutput> entries;  // sorted by track id
};

/// Wall time spent in each stage of the last step, in milliseconds.
struct StageTimings {
  double predict = 0.0;
  double associate = 0.0;
  double recover = 0.0;
  double initialize = 0.0;
  double maintain = 0.0;

  double total() const { return predict + associate + recover + initialize + maintain; }
};

/// True iff a gun box overlaps the shooter box under the configured mode.
/// `guns` must already be confidence-filtered.
inline bool confirm_with_gun(const Detection& shooter, std::span<const Detection> guns,
                             const TrackerConfig& cfg) {
  for (const auto& g : guns) {
    if (cfg.gun_overlap_mode == GunOverlapMode::AnyOverlap) {
      if (intersection_area(g.bbox, shooter.bbox) > 0.0) return true;
    } else if (containment_ratio(g.bbox, shooter.bbox) >= cfg.gun_containment_min) {
      return true;
    }
  }
  return false;
}

/// Confidence-scaled EMA factor: full-confidence detections use
/// alpha_fixed; at or below conf_floor the factor is 1 (embedding ignored).
inline double dynamic_alpha(double confidence, const TrackerConfig& cfg) {
  const double c = std::clamp(confidence, cfg.conf_floor, 1.0);
  const double trust = (c - cfg.conf_floor) / (1.0 - cfg.conf_floor);
  return cfg.alpha_fixed + (1.0 - cfg.alpha_fixed) * (1.0 - trust);
}

/**
 * Per-sequence tracking state machine.
 *
 * Each step: filter by class confidence, predict, fused first-stage
 * association, recovery against last observations, gun-gated
 * initialization, then aging. Gun detections are consumed only by the
 * initialization gate and never become tracks.
 */
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Track>& tracks() const { return tracks_; }

  FrameResult step(int frame, std::span<const Detection> dets, StageTimings* timings = nullptr) {
    if (last_frame_ && frame <= *last_frame_) {
      throw std::invalid_argument("tracker: frame " + std::to_string(frame) +
                                  " does not follow frame " + std::to_string(*last_frame_));
    }
    last_frame_ = frame;
    StageClock clock(timings);

    std::vector<const Detection*> shooters;
    std::vector<Detection> guns;
    for (const auto& d : dets) {
      if (d.cls == ClassId::Shooter && d.confidence >= cfg_.shooter_conf_thresh) {
        shooters.push_back(&d);
      } else if (d.cls == ClassId::Gun && d.confidence >= cfg_.gun_conf_thresh) {
        guns.push_back(d);
      }
    }

    for (auto& t : tracks_) t.state = kf_predict(t.state, cfg_.noise);
    clock.lap(&StageTimings::predict);

    std::vector<char> track_matched(tracks_.size(), 0);
    std::vector<char> det_used(shooters.size(), 0);
    associate_first_stage(frame, shooters, track_matched, det_used);
    clock.lap(&StageTimings::associate);

    if (cfg_.use_ocr) recover(frame, shooters, track_matched, det_used);
    clock.lap(&StageTimings::recover);

    for (std::size_t j = 0; j < shooters.size(); ++j) {
      if (det_used[j]) continue;
      const bool confirmed = confirm_with_gun(*shooters[j], guns, cfg_);
      if (cfg_.gun_confirmation && !confirmed) continue;
      tracks_.push_back(start_track(*shooters[j], frame, confirmed));
      track_matched.push_back(1);
    }
    clock.lap(&StageTimings::initialize);

    FrameResult out{frame, {}};
    std::vector<Track> kept;
    kept.reserve(tracks_.size());
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
      Track& t = tracks_[i];
      if (!track_matched[i]) {
        ++t.time_since_update;
        if (t.time_since_update > cfg_.max_age) continue;
      }
      if (t.time_since_update == 0 && t.hits >= cfg_.min_hits) {
        out.entries.push_back({t.id, state_to_bbox(t.state), t.last_confidence, t.shooter_confirmed});
      }
      kept.push_back(std::move(t));
    }
    tracks_ = std::move(kept);
    std::sort(out.entries.begin(), out.entries.end(),
              [](const TrackOutput& a, const TrackOutput& b) { return a.track_id < b.track_id; });
    clock.lap(&StageTimings::maintain);
    return out;
  }

 private:
  class StageClock {
   public:
    explicit StageClock(StageTimings* t) : out_(t) {
      if (out_) {
        *out_ = {};
        last_ = std::chrono::steady_clock::now();
      }
    }
    void lap(double StageTimings::*field) {
      if (!out_) return;
      const auto now = std::chrono::steady_clock::now();
      out_->*field += std::chrono::duration<double, std::milli>(now - last_).count();
      last_ = now;
    }

   private:
    StageTimings* out_;
    std::chrono::steady_clock::time_point last_;
  };

  void associate_first_stage(int frame, const std::vector<const Detection*>& shooters,
                             std::vector<char>& track_matched, std::vector<char>& det_used) {
    if (tracks_.empty() || shooters.empty()) return;
    const int n = static_cast<int>(tracks_.size());
    const int m = static_cast<int>(shooters.size());

    std::vector<BBox> predicted(n), det_boxes(m);
    std::vector<std::optional<Embedding>> track_embs(n), det_embs(m);
    for (int i = 0; i < n; ++i) {
      predicted[i] = state_to_bbox(tracks_[i].state);
      track_embs[i] = tracks_[i].ema_embedding;
    }
    for (int j = 0; j < m; ++j) {
      det_boxes[j] = shooters[j]->bbox;
      det_embs[j] = shooters[j]->embedding;
    }

    const CostMatrix iou_c = iou_cost(predicted, det_boxes, cfg_.iou_gate);
    CostMatrix angle(n, m);
    for (int i = 0; i < n; ++i) {
      const std::vector<Observation> hist(tracks_[i].history.begin(), tracks_[i].history.end());
      for (int j = 0; j < m; ++j) angle.at(i, j) = ocm_cost(hist, det_boxes[j], cfg_.delta_t);
    }
    const CostMatrix sim = similarity_matrix(track_embs, det_embs);
    const CostMatrix fused = fuse_costs(iou_c, angle, sim, cfg_.weights());

    for (const auto& [i, j] : solve_assignment(fused).matches) {
      apply_observation(tracks_[i], *shooters[j], frame);
      track_matched[i] = 1;
      det_used[j] = 1;
    }
  }

  // Second pass on IoU only, against each unmatched track's last observed box.
  void recover(int frame, const std::vector<const Detection*>& shooters,
               std::vector<char>& track_matched, std::vector<char>& det_used) {
    std::vector<int> rows, cols;
    for (std::size_t i = 0; i < tracks_.size(); ++i)
      if (!track_matched[i]) rows.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < shooters.size(); ++j)
      if (!det_used[j]) cols.push_back(static_cast<int>(j));
    if (rows.empty() || cols.empty()) return;

    std::vector<BBox> last_obs, det_boxes;
    for (int i : rows) last_obs.push_back(tracks_[i].history.back().box);
    for (int j : cols) det_boxes.push_back(shooters[j]->bbox);
    const CostMatrix c = iou_cost(last_obs, det_boxes, cfg_.iou_gate);
    for (const auto& [r, k] : solve_assignment(c).matches) {
      const int i = rows[r];
      const int j = cols[k];
      apply_observation(tracks_[i], *shooters[j], frame);
      track_matched[i] = 1;
      det_used[j] = 1;
    }
  }

  void apply_observation(Track& t, const Detection& d, int frame) {
    const int t_last = t.snapshot.frame;
    if (frame - t_last > 1) {
      t.state = oru_reupdate(t.snapshot, t.history.back().box, d.bbox, t_last, frame, cfg_.noise);
    } else {
      t.state = kf_update(t.state, d.bbox, cfg_.noise);
    }
    t.snapshot = {frame, t.state};
    push_history(t, {frame, d.bbox});
    ++t.hits;
    t.time_since_update = 0;
    t.last_confidence = d.confidence;

    if (d.embedding) {
      if (!t.ema_embedding) {
        t.ema_embedding = d.embedding;
      } else {
        const double a = dynamic_alpha(d.confidence, cfg_);
        Embedding& ema = *t.ema_embedding;
        if (ema.dim() != d.embedding->dim()) {
          throw std::invalid_argument("tracker: embedding dimension changed mid-sequence");
        }
        for (std::size_t k = 0; k < ema.dim(); ++k) {
          ema.values[k] = a * ema.values[k] + (1.0 - a) * d.embedding->values[k];
        }
        normalize(ema);
      }
    }
  }

  void push_history(Track& t, Observation o) {
    t.history.push_back(o);
    const std::size_t cap = static_cast<std::size_t>(std::max(cfg_.delta_t + 1, 2));
    while (t.history.size() > cap) t.history.pop_front();
  }

  Track start_track(const Detection& d, int frame, bool confirmed) {
    Track t;
    t.id = next_id_++;
    t.state = kf_init(d.bbox, cfg_.noise);
    t.snapshot = {frame, t.state};
    t.history.push_back({frame, d.bbox});
    t.ema_embedding = d.embedding;
    t.hits = 1;
    t.time_since_update = 0;
    t.shooter_confirmed = confirmed;
    t.last_confidence = d.confidence;
    return t;
  }

  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  std::optional<int> last_frame_;
};

/// Embeddings keyed by (0-based frame, 0-based detection index within frame).
using EmbeddingTable = std::map<std::pair<int, int>, Embedding>;

/**
 * Runs a tracker over a whole sequence. Detections must be grouped by
 * frame in file order; every frame from 0 through the last detection
 * frame (or `num_frames - 1` if larger) is stepped, including empty ones.
 */
inline std::vector<FrameResult> run_sequence(std::span<const Detection> dets,
                                             const EmbeddingTable* embs,
                                             const TrackerConfig& cfg, int num_frames = 0) {
  int last = num_frames - 1;
  for (const auto& d : dets) {
    if (d.frame < 0) throw std::invalid_argument("run_sequence: negative frame index");
    last = std::max(last, d.frame);
  }

  std::vector<std::vector<Detection>> by_frame(static_cast<std::size_t>(last + 1));
  for (const auto& d : dets) by_frame[d.frame].push_back(d);
  if (embs != nullptr) {
    for (const auto& [key, e] : *embs) {
      const auto [frame, index] = key;
      if (frame < 0 || frame > last || index < 0 ||
          index >= static_cast<int>(by_frame[frame].size())) {
        throw std::invalid_argument("run_sequence: embedding references missing detection (frame " +
                                    std::to_string(frame + 1) + ", det " + std::to_string(index) + ")");
      }
      by_frame[frame][index].embedding = e;
    }
  }

  Tracker tracker(cfg);
  std::vector<FrameResult> results;
  results.reserve(by_frame.size());
  for (int f = 0; f <= last; ++f) results.push_back(tracker.step(f, by_frame[f]));
  return results;
}

}  // namespace shtrack

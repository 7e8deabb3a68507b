// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>

#include "shtrack/geometry.hpp"

namespace shtrack {

using StateVector = Eigen::Matrix<double, 7, 1>;
using StateCovariance = Eigen::Matrix<double, 7, 7>;
using MeasurementVector = Eigen::Matrix<double, 4, 1>;

/**
 * Constant-velocity box filter over [u, v, s, r, du, dv, ds]:
 * u, v = box center, s = area, r = aspect ratio w/h (held constant).
 * The measurement is [u, v, s, r].
 */
struct KalmanState {
  StateVector mean = StateVector::Zero();
  StateCovariance covariance = StateCovariance::Identity();
};

/// Noise magnitudes, expressed as diagonals.
struct KalmanNoise {
  std::array<double, 7> initial_covariance{10, 10, 10, 10, 1e4, 1e4, 1e4};
  std::array<double, 7> process{1, 1, 1, 1, 0.01, 0.01, 1e-4};
  std::array<double, 4> measurement{1, 1, 10, 10};
  double area_floor = 1e-6;
};

/// State of a track as of its last accepted observation; the rollback
/// point for re-update after a gap.
struct StateSnapshot {
  int frame = 0;
  KalmanState state;
};

inline MeasurementVector to_measurement(const BBox& b) {
  if (!(b.w > 0.0 && b.h > 0.0)) {
    throw std::invalid_argument("kalman: measurement box must have positive area");
  }
  MeasurementVector z;
  z << b.cx(), b.cy(), b.w * b.h, b.w / b.h;
  return z;
}

/// Box described by a measurement-space vector; degenerate (zero) when
/// s or r is non-positive.
inline BBox measurement_to_bbox(double u, double v, double s, double r) {
  if (s <= 0.0 || r <= 0.0) return {u, v, 0.0, 0.0};
  const double w = std::sqrt(s * r);
  const double h = s / w;
  return {u - 0.5 * w, v - 0.5 * h, w, h};
}

inline BBox state_to_bbox(const KalmanState& st) {
  return measurement_to_bbox(st.mean(0), st.mean(1), st.mean(2), st.mean(3));
}

namespace detail {

inline StateCovariance transition() {
  StateCovariance f = StateCovariance::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

inline Eigen::Matrix<double, 4, 7> observation() {
  Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
  for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
  return h;
}

inline void symmetrize(StateCovariance& p) { p = 0.5 * (p + p.transpose()).eval(); }

}  // namespace detail

inline KalmanState kf_init(const BBox& z, const KalmanNoise& noise = {}) {
  KalmanState st;
  st.mean.head<4>() = to_measurement(z);
  st.mean.tail<3>().setZero();
  st.covariance.setZero();
  for (int i = 0; i < 7; ++i) st.covariance(i, i) = noise.initial_covariance[i];
  return st;
}

inline KalmanState kf_predict(const KalmanState& in, const KalmanNoise& noise = {}) {
  KalmanState st = in;
  // Area must stay positive; drop the area rate if it would cross zero.
  if (st.mean(2) + st.mean(6) <= 0.0) st.mean(6) = 0.0;
  const StateCovariance f = detail::transition();
  st.mean = f * st.mean;
  if (st.mean(2) < noise.area_floor) st.mean(2) = noise.area_floor;
  StateCovariance q = StateCovariance::Zero();
  for (int i = 0; i < 7; ++i) q(i, i) = noise.process[i];
  st.covariance = f * st.covariance * f.transpose() + q;
  detail::symmetrize(st.covariance);
  return st;
}

inline KalmanState kf_update(const KalmanState& in, const MeasurementVector& z,
                             const KalmanNoise& noise = {}) {
  const auto h = detail::observation();
  Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 4; ++i) r(i, i) = noise.measurement[i];

  const MeasurementVector innovation = z - h * in.mean;
  const Eigen::Matrix4d s = h * in.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 7, 4> gain =
      in.covariance * h.transpose() * s.inverse();

  KalmanState st;
  st.mean = in.mean + gain * innovation;
  // Joseph form keeps the covariance symmetric positive semi-definite.
  const StateCovariance ikh = StateCovariance::Identity() - gain * h;
  st.covariance = ikh * in.covariance * ikh.transpose() + gain * r * gain.transpose();
  detail::symmetrize(st.covariance);
  return st;
}

inline KalmanState kf_update(const KalmanState& in, const BBox& z,
                             const KalmanNoise& noise = {}) {
  return kf_update(in, to_measurement(z), noise);
}

/**
 * Observation-centric re-update. Rolls back to the snapshot taken at
 * `t_last`, walks a virtual trajectory linearly interpolated in
 * measurement space between `z_last` and `z_new` through every skipped
 * frame, then applies `z_new` at `t_new`.
 *
 * With no skipped frames this is exactly predict + update on the snapshot.
 */
inline KalmanState oru_reupdate(const StateSnapshot& snapshot, const BBox& z_last,
                                const BBox& z_new, int t_last, int t_new,
                                const KalmanNoise& noise = {}) {
  if (t_new <= t_last) {
    throw std::invalid_argument("oru_reupdate: t_new must be after t_last");
  }
  const MeasurementVector a = to_measurement(z_last);
  const MeasurementVector b = to_measurement(z_new);
  const double span = static_cast<double>(t_new - t_last);

  KalmanState st = snapshot.state;
  for (int t = t_last + 1; t < t_new; ++t) {
    const double frac = static_cast<double>(t - t_last) / span;
    const MeasurementVector virt = a + frac * (b - a);
    st = kf_update(kf_predict(st, noise), virt, noise);
  }
  return kf_update(kf_predict(st, noise), b, noise);
}

}  // namespace shtrack

#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "artde/linalg.hpp"

namespace artde {

enum class TrajectoryKind { Lemniscate3d, JointSinusoid, Hold };

inline std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Lemniscate3d: return "lemniscate3d";
    case TrajectoryKind::JointSinusoid: return "joint_sinusoid";
    case TrajectoryKind::Hold: return "hold";
  }
  return "unknown";
}

inline TrajectoryKind parse_trajectory_kind(std::string_view s) {
  if (s == "lemniscate3d") return TrajectoryKind::Lemniscate3d;
  if (s == "joint_sinusoid") return TrajectoryKind::JointSinusoid;
  if (s == "hold") return TrajectoryKind::Hold;
  detail::fail("unknown trajectory kind '", s, "' (expected lemniscate3d, joint_sinusoid or hold)");
}

/// Reference description.
///
/// lemniscate3d: p(t) = center + r(t) (A sin wt, B sin 2wt, C sin wt) with
///   amplitudes = (A, B, C), center = offsets, w = 2 pi / period. The path
///   crosses its center every half period.
/// joint_sinusoid: q_i(t) = offset_i + r(t) a_i sin(w t + phase_i).
/// hold: q(t) = offsets.
///
/// r(t) is a quintic ramp over [0, ramp] (identically 1 when ramp = 0), so the
/// reference starts at rest with zero acceleration.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Hold;
  Vector amplitudes;
  Vector offsets;
  Vector phases;
  double period = 1.0;
  double ramp = 0.0;
  double yaw = 0.0;       // rad
  double yaw_rate = 0.0;  // rad/s

  Eigen::Index dim() const { return offsets.size(); }

  void validate() const {
    if (!(period > 0.0)) detail::fail("trajectory period must be positive, got ", period);
    if (!(ramp >= 0.0)) detail::fail("trajectory ramp must be non-negative, got ", ramp);
    if (offsets.size() == 0) detail::fail("trajectory offsets must not be empty");
    switch (kind) {
      case TrajectoryKind::Lemniscate3d:
        if (amplitudes.size() != 3 || offsets.size() != 3)
          detail::fail("lemniscate3d needs 3 amplitudes and a 3D center");
        break;
      case TrajectoryKind::JointSinusoid:
        if (amplitudes.size() != offsets.size() || phases.size() != offsets.size())
          detail::fail("joint_sinusoid needs amplitudes, offsets and phases of equal length");
        break;
      case TrajectoryKind::Hold:
        break;
    }
  }
};

struct TrajectorySample {
  Vector pos;
  Vector vel;
  Vector acc;
  double psi = 0.0;
  double dpsi = 0.0;
};

namespace detail {

struct Ramp {
  double r, dr, ddr;
};

inline Ramp quintic_ramp(double t, double duration) {
  if (duration <= 0.0 || t >= duration) return {1.0, 0.0, 0.0};
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  const double s = t / duration;
  const double s2 = s * s, s3 = s2 * s;
  return {s3 * (10.0 - 15.0 * s + 6.0 * s2),
          30.0 * s2 * (1.0 - 2.0 * s + s2) / duration,
          60.0 * s * (1.0 - 3.0 * s + 2.0 * s2) / (duration * duration)};
}

}  // namespace detail

inline TrajectorySample sample(const TrajectorySpec& spec, double t) {
  if (!(t >= 0.0)) detail::fail("trajectory sample time must be non-negative, got ", t);
  const Eigen::Index n = spec.dim();
  TrajectorySample out{spec.offsets, Vector::Zero(n), Vector::Zero(n), spec.yaw + spec.yaw_rate * t,
                       spec.yaw_rate};
  if (spec.kind == TrajectoryKind::Hold) return out;

  const double w = 2.0 * M_PI / spec.period;
  Vector f(n), df(n), ddf(n);
  if (spec.kind == TrajectoryKind::Lemniscate3d) {
    const double s1 = std::sin(w * t), c1 = std::cos(w * t);
    const double s2 = std::sin(2.0 * w * t), c2 = std::cos(2.0 * w * t);
    const Vector& a = spec.amplitudes;
    f << a(0) * s1, a(1) * s2, a(2) * s1;
    df << a(0) * w * c1, a(1) * 2.0 * w * c2, a(2) * w * c1;
    ddf << -a(0) * w * w * s1, -a(1) * 4.0 * w * w * s2, -a(2) * w * w * s1;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double arg = w * t + spec.phases(i);
      const double a = spec.amplitudes(i);
      f(i) = a * std::sin(arg);
      df(i) = a * w * std::cos(arg);
      ddf(i) = -a * w * w * std::sin(arg);
    }
  }
  const auto r = detail::quintic_ramp(t, spec.ramp);
  out.pos += r.r * f;
  out.vel = r.dr * f + r.r * df;
  out.acc = r.ddr * f + 2.0 * r.dr * df + r.r * ddf;
  return out;
}

}  // namespace artde

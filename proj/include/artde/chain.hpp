#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "artde/linalg.hpp"

namespace artde {

/// One rigid link of a planar serial chain. Inertia is about the link's
/// center of mass; com is measured from the proximal joint along the link.
struct Link {
  double mass = 1.0;
  double length = 0.2;
  double com = 0.1;
  double inertia = 0.003;
};

/// Planar n-link chain rotating in the vertical plane. Joint angles are
/// relative; q = 0 has every link hanging straight down.
struct ChainParams {
  std::vector<Link> links;
  Vector friction;  // viscous coefficient per joint, f(dq) = friction .* dq
  Vector armature;  // reflected rotor inertia per joint (kg m^2); empty means none
  double gravity = 9.81;

  static constexpr std::size_t max_links = 4;

  Eigen::Index dof() const { return static_cast<Eigen::Index>(links.size()); }

  void validate() const {
    if (links.empty() || links.size() > max_links)
      detail::fail("chain must have between 1 and ", max_links, " links, got ", links.size());
    for (std::size_t i = 0; i < links.size(); ++i) {
      const Link& l = links[i];
      if (!(l.mass > 0.0) || !(l.length > 0.0) || !(l.inertia > 0.0))
        detail::fail("link ", i, " needs positive mass, length and inertia");
      if (!(l.com >= 0.0) || l.com > l.length)
        detail::fail("link ", i, " center of mass must lie on the link");
    }
    if (friction.size() != dof()) detail::fail("friction must have one entry per joint");
    if ((friction.array() < 0.0).any()) detail::fail("friction coefficients must be non-negative");
    if (armature.size() != 0 && armature.size() != dof()) detail::fail("armature must have one entry per joint");
    if ((armature.array() < 0.0).any()) detail::fail("armature inertias must be non-negative");
  }
};

namespace detail {

using Vec2 = Eigen::Vector2d;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Joint origins o_k (k = 0..n) and link centers of mass c_i.
struct ChainGeometry {
  std::vector<Vec2> origin;
  std::vector<Vec2> com;
};

inline ChainGeometry chain_geometry(const Vector& q, const ChainParams& params) {
  const auto n = params.links.size();
  if (static_cast<std::size_t>(q.size()) != n)
    fail("chain state has ", q.size(), " coordinates, chain has ", n, " links");
  ChainGeometry g;
  g.origin.assign(n + 1, Vec2::Zero());
  g.com.assign(n, Vec2::Zero());
  double angle = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    angle += q(static_cast<Eigen::Index>(i));
    const Vec2 dir(std::sin(angle), -std::cos(angle));
    g.com[i] = g.origin[i] + params.links[i].com * dir;
    g.origin[i + 1] = g.origin[i] + params.links[i].length * dir;
  }
  return g;
}

}  // namespace detail

/// M_kl = sum_{i >= max(k,l)} I_i + m_i (c_i - o_k).(c_i - o_l), plus the
/// armature on the diagonal.
inline Matrix chain_inertia(const Vector& q, const ChainParams& params) {
  const auto g = detail::chain_geometry(q, params);
  const Eigen::Index n = params.dof();
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = k; l < n; ++l) {
      double sum = 0.0;
      for (Eigen::Index i = l; i < n; ++i) {
        const Link& link = params.links[i];
        sum += link.inertia + link.mass * (g.com[i] - g.origin[k]).dot(g.com[i] - g.origin[l]);
      }
      m(k, l) = m(l, k) = sum;
    }
  if (params.armature.size() == n) m.diagonal() += params.armature;
  return m;
}

/// dM/dq_m for every m. A point downstream of joint m moves with
/// d(p)/dq_m = z x (p - o_m), so d(c_i - o_k)/dq_m = z x (c_i - o_max(k,m)).
inline std::vector<Matrix> chain_inertia_partials(const Vector& q, const ChainParams& params) {
  const auto g = detail::chain_geometry(q, params);
  const Eigen::Index n = params.dof();
  std::vector<Matrix> out(n, Matrix::Zero(n, n));
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index l = k; l < n; ++l) {
        double sum = 0.0;
        for (Eigen::Index i = std::max(l, m); i < n; ++i) {
          const detail::Vec2 a = g.com[i] - g.origin[k];
          const detail::Vec2 b = g.com[i] - g.origin[l];
          const detail::Vec2 da = g.com[i] - g.origin[std::max(k, m)];
          const detail::Vec2 db = g.com[i] - g.origin[std::max(l, m)];
          sum += params.links[i].mass * (detail::cross2(da, b) + detail::cross2(db, a));
        }
        out[m](k, l) = out[m](l, k) = sum;
      }
  return out;
}

/// Coriolis/centripetal matrix from Christoffel symbols, so Mdot - 2C is skew.
inline Matrix chain_coriolis(const Vector& q, const Vector& dq, const ChainParams& params) {
  const auto dm = chain_inertia_partials(q, params);
  const Eigen::Index n = params.dof();
  if (dq.size() != n) detail::fail("chain velocity has ", dq.size(), " entries, expected ", n);
  Matrix c = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        c(k, j) += 0.5 * (dm[i](k, j) + dm[j](k, i) - dm[k](i, j)) * dq(i);
  return c;
}

/// G_k = g sum_{i >= k} m_i (c_i - o_k)_x
inline Vector chain_gravity(const Vector& q, const ChainParams& params) {
  const auto g = detail::chain_geometry(q, params);
  const Eigen::Index n = params.dof();
  Vector out = Vector::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = k; i < n; ++i)
      out(k) += params.gravity * params.links[i].mass * (g.com[i].x() - g.origin[k].x());
  return out;
}

inline Vector chain_friction(const Vector& dq, const ChainParams& params) {
  return params.friction.cwiseProduct(dq);
}

/// Non-inertial terms H = C dq + G + f(dq) + d.
inline Vector chain_nonlinear_terms(const Vector& q, const Vector& dq, const ChainParams& params,
                                    const Vector& d) {
  return chain_coriolis(q, dq, params) * dq + chain_gravity(q, params) +
         chain_friction(dq, params) + d;
}

/// ddq = M(q)^{-1} (tau - C dq - G - f(dq) - d)
inline Vector chain_dynamics(const Vector& q, const Vector& dq, const Vector& tau,
                             const ChainParams& params, const Vector& d) {
  const Eigen::Index n = params.dof();
  if (n < 1 || n > static_cast<Eigen::Index>(ChainParams::max_links))
    detail::fail("chain_dynamics supports 1 to ", ChainParams::max_links, " links, got ", n);
  if (dq.size() != n || tau.size() != n || d.size() != n)
    detail::fail("chain_dynamics: dimension mismatch for a ", n, "-link chain");
  const Matrix m = chain_inertia(q, params);
  return m.llt().solve(tau - chain_nonlinear_terms(q, dq, params, d));
}

/// Kinetic plus potential energy (potential zero at the base height).
inline double chain_energy(const Vector& q, const Vector& dq, const ChainParams& params) {
  const auto g = detail::chain_geometry(q, params);
  double potential = 0.0;
  for (std::size_t i = 0; i < params.links.size(); ++i)
    potential += params.links[i].mass * params.gravity * g.com[i].y();
  return 0.5 * dq.dot(chain_inertia(q, params) * dq) + potential;
}

struct PropertyBounds {
  double psi_min = 0.0;      // min eigenvalue of M over the samples
  double psi_max = 0.0;      // max eigenvalue of M over the samples
  double coriolis_bound = 0.0;  // max ||C(q, dq)||_2 / ||dq||
};

/// Empirical uniform-definiteness and Coriolis bounds over state samples.
inline PropertyBounds property_bounds_check(const ChainParams& params, std::span<const Vector> q_samples,
                                            std::span<const Vector> dq_samples) {
  if (q_samples.empty()) detail::fail("property_bounds_check: no configuration samples");
  PropertyBounds out;
  out.psi_min = std::numeric_limits<double>::infinity();
  for (const Vector& q : q_samples) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(chain_inertia(q, params), Eigen::EigenvaluesOnly);
    out.psi_min = std::min(out.psi_min, es.eigenvalues().minCoeff());
    out.psi_max = std::max(out.psi_max, es.eigenvalues().maxCoeff());
    for (const Vector& dq : dq_samples) {
      const double speed = dq.norm();
      if (speed == 0.0) continue;
      Eigen::JacobiSVD<Matrix> svd(chain_coriolis(q, dq, params));
      out.coriolis_bound = std::max(out.coriolis_bound, svd.singularValues()(0) / speed);
    }
  }
  return out;
}

enum class PulseShape { HalfSine, Rectangular };

/// A force/torque pulse. With repeat_period > 0 it recurs every period until
/// repeat_until (or forever when repeat_until <= start).
struct Impulse {
  double start = 0.0;
  double duration = 0.1;
  double peak = 10.0;
  Vector mask;  // per-channel weight (moment arm) applied to the peak
  PulseShape shape = PulseShape::HalfSine;
  double repeat_period = 0.0;
  double repeat_until = 0.0;
};

/// d = bias + D0 q + D1 |dq| dq + sum of active pulses.
struct DisturbanceProfile {
  Vector bias;
  Matrix d0;
  Matrix d1;
  std::vector<Impulse> impulses;

  static DisturbanceProfile none(Eigen::Index n) {
    return {Vector::Zero(n), Matrix::Zero(n, n), Matrix::Zero(n, n), {}};
  }

  void validate(Eigen::Index n) const {
    if (bias.size() != n || d0.rows() != n || d0.cols() != n || d1.rows() != n || d1.cols() != n)
      detail::fail("disturbance profile dimensions must match the ", n, "-joint chain");
    for (const Impulse& p : impulses) {
      if (!(p.duration > 0.0)) detail::fail("impulse duration must be positive, got ", p.duration);
      if (p.mask.size() != n) detail::fail("impulse mask must have ", n, " entries");
      if (p.repeat_period < 0.0) detail::fail("impulse repeat period must be non-negative");
    }
  }
};

/// Pulse value in [0, 1] at time t, or 0 when inactive.
inline double pulse_level(const Impulse& p, double t) {
  double local = t - p.start;
  if (local < 0.0) return 0.0;
  if (p.repeat_period > 0.0) {
    if (p.repeat_until > p.start && t >= p.repeat_until) return 0.0;
    local = std::fmod(local, p.repeat_period);
  }
  if (local >= p.duration) return 0.0;
  return p.shape == PulseShape::HalfSine ? std::sin(M_PI * local / p.duration) : 1.0;
}

inline Vector disturbance_at(const DisturbanceProfile& profile, double t, const Vector& q,
                             const Vector& dq) {
  Vector d = profile.bias + profile.d0 * q + profile.d1 * (dq.norm() * dq);
  for (const Impulse& p : profile.impulses) {
    const double level = pulse_level(p, t);
    if (level != 0.0) d += (p.peak * level) * p.mask;
  }
  return d;
}

}  // namespace artde

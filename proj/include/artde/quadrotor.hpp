#pragma once

#include <array>
#include <cmath>
#include <utility>

#include "artde/linalg.hpp"

namespace artde {

struct QuadrotorParams {
  double mass = 1.4;                                     // kg, airframe without payload
  Matrix3 inertia = Vector3(0.0123, 0.0123, 0.0224).asDiagonal();  // body frame, kg m^2
  double gravity = 9.81;
  double payload_mass = 0.35;
  bool payload_attached = true;
  // Full model: J(q) = W^T J_b W with Christoffel Coriolis terms. Otherwise
  // constant J = J_b and C_q = 0.
  bool euler_coupling = true;

  double effective_mass() const { return mass + (payload_attached ? payload_mass : 0.0); }
  /// Body inertia scaled with the carried mass.
  Matrix3 effective_inertia() const { return inertia * (effective_mass() / mass); }

  void validate() const {
    if (!(mass > 0.0)) detail::fail("quadrotor mass must be positive, got ", mass);
    if (!(payload_mass >= 0.0)) detail::fail("payload mass must be non-negative, got ", payload_mass);
    if (!(gravity >= 0.0)) detail::fail("gravity must be non-negative, got ", gravity);
    if (!is_symmetric_positive_definite(inertia))
      detail::fail("quadrotor inertia must be symmetric positive definite");
  }
};

/// Position p (m), velocity dp, Euler angles q = (phi, theta, psi) and their rates.
struct QuadrotorState {
  Vector3 p = Vector3::Zero();
  Vector3 dp = Vector3::Zero();
  Vector3 q = Vector3::Zero();
  Vector3 dq = Vector3::Zero();
};

struct ReferenceSetpoint {
  Vector3 p_d = Vector3::Zero();
  Vector3 dp_d = Vector3::Zero();
  Vector3 ddp_d = Vector3::Zero();
  double psi_d = 0.0;
  double dpsi_d = 0.0;
};

/// m p'' + G + d_p = tau_p, with G = (0, 0, m g) and the payload-inclusive mass.
inline Vector3 position_dynamics(const QuadrotorState&, const QuadrotorParams& params,
                                 const Vector3& tau_p, const Vector3& d_p) {
  const double m = params.effective_mass();
  const Vector3 g(0.0, 0.0, m * params.gravity);
  return (tau_p - g - d_p) / m;
}

namespace detail {

// Body rates from Euler rates, omega = W(q) dq, for the Z-Y-X convention.
inline Matrix3 euler_rate_map(const Vector3& q) {
  const double cf = std::cos(q.x()), sf = std::sin(q.x());
  const double ct = std::cos(q.y()), st = std::sin(q.y());
  Matrix3 w;
  w << 1.0, 0.0, -st,
       0.0, cf, sf * ct,
       0.0, -sf, cf * ct;
  return w;
}

inline std::array<Matrix3, 3> euler_rate_map_partials(const Vector3& q) {
  const double cf = std::cos(q.x()), sf = std::sin(q.x());
  const double ct = std::cos(q.y()), st = std::sin(q.y());
  Matrix3 d_phi, d_theta;
  d_phi << 0.0, 0.0, 0.0,
           0.0, -sf, cf * ct,
           0.0, -cf, -sf * ct;
  d_theta << 0.0, 0.0, -ct,
             0.0, 0.0, -sf * st,
             0.0, 0.0, -cf * st;
  return {d_phi, d_theta, Matrix3::Zero()};
}

}  // namespace detail

/// Configuration-dependent attitude inertia J(q).
inline Matrix3 attitude_inertia(const Vector3& q, const QuadrotorParams& params) {
  const Matrix3 jb = params.effective_inertia();
  if (!params.euler_coupling) return jb;
  const Matrix3 w = detail::euler_rate_map(q);
  return w.transpose() * jb * w;
}

/// dJ/dq_i for i = phi, theta, psi.
inline std::array<Matrix3, 3> attitude_inertia_partials(const Vector3& q,
                                                        const QuadrotorParams& params) {
  std::array<Matrix3, 3> out{Matrix3::Zero(), Matrix3::Zero(), Matrix3::Zero()};
  if (!params.euler_coupling) return out;
  const Matrix3 jb = params.effective_inertia();
  const Matrix3 w = detail::euler_rate_map(q);
  const auto dw = detail::euler_rate_map_partials(q);
  for (int i = 0; i < 3; ++i) {
    const Matrix3 half = dw[i].transpose() * jb * w;
    out[i] = half + half.transpose();
  }
  return out;
}

/// Coriolis matrix from the Christoffel symbols of J(q).
inline Matrix3 attitude_coriolis(const Vector3& q, const Vector3& dq, const QuadrotorParams& params) {
  Matrix3 c = Matrix3::Zero();
  if (!params.euler_coupling) return c;
  const auto dj = attitude_inertia_partials(q, params);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i)
        c(k, j) += 0.5 * (dj[i](k, j) + dj[j](k, i) - dj[k](i, j)) * dq(i);
  return c;
}

/// J(q) q'' + C_q(q, dq) dq + d_q = tau_q
inline Vector3 attitude_dynamics(const QuadrotorState& state, const QuadrotorParams& params,
                                 const Vector3& tau_q, const Vector3& d_q) {
  const Matrix3 j = attitude_inertia(state.q, params);
  Eigen::FullPivLU<Matrix3> lu(j);
  if (!lu.isInvertible())
    detail::fail("attitude inertia is singular at pitch ", state.q.y(), " rad");
  return lu.solve(tau_q - attitude_coriolis(state.q, state.dq, params) * state.dq - d_q);
}

/// Collective thrust u1 realizing tau_p along the body z axis: u1 = tau_p . R e3.
inline double thrust_from_tau_p(const Vector3& tau_p, const Matrix3& r) {
  return tau_p.dot(r.col(2));
}

/// Desired attitude whose body z axis points along tau_p at yaw psi_d.
inline Matrix3 desired_attitude(const Vector3& tau_p, double psi_d) {
  const double thrust = tau_p.norm();
  if (thrust < 1e-6) detail::fail("desired_attitude: degenerate thrust vector, |tau_p| = ", thrust);
  const Vector3 z_b = tau_p / thrust;
  const Vector3 y_a(-std::sin(psi_d), std::cos(psi_d), 0.0);
  const Vector3 x_raw = y_a.cross(z_b);
  const double x_norm = x_raw.norm();
  if (x_norm < 1e-6)
    detail::fail("desired_attitude: thrust axis is parallel to the yaw reference axis");
  const Vector3 x_b = x_raw / x_norm;
  const Vector3 y_b = z_b.cross(x_b);
  Matrix3 r_d;
  r_d.col(0) = x_b;
  r_d.col(1) = y_b;
  r_d.col(2) = z_b;
  return r_d;
}

/// Attitude error used by the co-design:
///   e_q = vee(R_d^T R - R^T R_d),  de_q = dq - R_d^T R dq_d.
/// Both are actual-minus-desired; there is no 1/2 factor on e_q.
inline std::pair<Vector3, Vector3> attitude_error(const Matrix3& r_d, const Matrix3& r,
                                                  const Vector3& dq, const Vector3& dq_d) {
  const Vector3 e_q = vee(r_d.transpose() * r - r.transpose() * r_d);
  const Vector3 de_q = dq - r_d.transpose() * r * dq_d;
  return {e_q, de_q};
}

}  // namespace artde

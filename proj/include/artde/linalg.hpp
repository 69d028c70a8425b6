#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace artde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

/// Raised for malformed inputs: dimension mismatches, non-Hurwitz systems,
/// invalid configuration values.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
[[noreturn]] inline void fail(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  throw Error(oss.str());
}

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    fail(what, " must be a non-empty square matrix, got ", m.rows(), "x", m.cols());
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) fail(what, " contains non-finite entries");
}

}  // namespace detail

/// Largest real part over the eigenvalues of `a`.
inline double spectral_abscissa(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

inline bool is_symmetric_positive_definite(const Matrix& m, double sym_tol = 1e-12) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if ((m - m.transpose()).norm() > sym_tol * std::max(1.0, m.norm())) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

/// Solves the continuous Lyapunov equation A^T P + P A = -Q.
///
/// The equation is vectorized as (I (x) A^T + A^T (x) I) vec(P) = -vec(Q) and
/// solved by dense LU. The dimension is small (2n <= 12 for every plant here),
/// so the n^6 cost does not matter. The result is symmetrized.
///
/// Throws Error when A is not Hurwitz: either the Kronecker system is
/// singular (an eigenvalue pair with lambda_i + lambda_j = 0) or the solution
/// is not positive definite (an eigenvalue with non-negative real part).
inline Matrix lyapunov_solve(const Matrix& a, const Matrix& q) {
  detail::require_square(a, "A");
  detail::require_square(q, "Q");
  detail::require_finite(a, "A");
  detail::require_finite(q, "Q");
  if (a.rows() != q.rows())
    detail::fail("A is ", a.rows(), "x", a.cols(), " but Q is ", q.rows(), "x", q.cols());
  if (!is_symmetric_positive_definite(q, 1e-12))
    detail::fail("Q must be symmetric positive definite");

  const Eigen::Index n = a.rows();
  const Matrix at = a.transpose();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix kron(n * n, n * n);
  // vec is column-major: vec(A^T P) = (I (x) A^T) vec(P), vec(P A) = (A^T (x) I) vec(P).
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      kron.block(i * n, j * n, n, n) = eye(i, j) * at + at(i, j) * eye;

  Eigen::FullPivLU<Matrix> lu(kron);
  const double abscissa = spectral_abscissa(a);
  if (!lu.isInvertible())
    detail::fail("Lyapunov system is singular: A has eigenvalues summing to zero "
                 "(max real part ", abscissa, "), A must be Hurwitz");

  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  const Vector x = lu.solve(rhs);
  Matrix p = Eigen::Map<const Matrix>(x.data(), n, n);
  p = 0.5 * (p + p.transpose());

  Eigen::LLT<Matrix> llt(p);
  if (llt.info() != Eigen::Success)
    detail::fail("Lyapunov solution is not positive definite: A has an eigenvalue "
                 "with real part ", abscissa, " >= 0, A must be Hurwitz");
  return p;
}

/// Block companion matrix [[0, I], [-kp, -kd]] of the error dynamics.
inline Matrix companion_matrix(const Matrix& kp, const Matrix& kd) {
  detail::require_square(kp, "K_P");
  detail::require_square(kd, "K_D");
  if (kp.rows() != kd.rows())
    detail::fail("K_P is ", kp.rows(), "x", kp.cols(), " but K_D is ", kd.rows(), "x", kd.cols());
  const Eigen::Index n = kp.rows();
  Matrix a = Matrix::Zero(2 * n, 2 * n);
  a.topRightCorner(n, n).setIdentity();
  a.bottomLeftCorner(n, n) = -kp;
  a.bottomRightCorner(n, n) = -kd;
  return a;
}

/// Z-Y-X Euler angle rotation (body to world): R = Rz(psi) Ry(theta) Rx(phi).
inline Matrix3 euler_to_rotation(double phi, double theta, double psi) {
  const double cf = std::cos(phi), sf = std::sin(phi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cp = std::cos(psi), sp = std::sin(psi);
  Matrix3 r;
  r << cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf,
       sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf,
       -st,     sf * ct,                ct * cf;
  return r;
}

inline Matrix3 euler_to_rotation(const Vector3& angles) {
  return euler_to_rotation(angles.x(), angles.y(), angles.z());
}

/// Inverse of euler_to_rotation for |theta| < pi/2. Returns (phi, theta, psi).
inline Vector3 rotation_to_euler(const Matrix3& r) {
  const double theta = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double phi = std::atan2(r(2, 1), r(2, 2));
  const double psi = std::atan2(r(1, 0), r(0, 0));
  return {phi, theta, psi};
}

inline Matrix3 hat(const Vector3& v) {
  Matrix3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// Inverse of hat. Rejects matrices whose symmetric part exceeds 1e-9.
inline Vector3 vee(const Matrix3& s) {
  const double asym = (s + s.transpose()).norm();
  if (asym >= 1e-9) detail::fail("vee: matrix is not skew-symmetric, ||S + S^T||_F = ", asym);
  return {s(2, 1), s(0, 2), s(1, 0)};
}

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a + M_PI, two_pi);
  if (a < 0) a += two_pi;
  return a - M_PI;
}

}  // namespace artde

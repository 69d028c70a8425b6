#pragma once

#include <cctype>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "artde/linalg.hpp"
#include "artde/tde.hpp"

namespace artde {

enum class Variant { TDC, ATDE, ARTDE };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::TDC: return "tdc";
    case Variant::ATDE: return "atde";
    case Variant::ARTDE: return "artde";
  }
  return "unknown";
}

inline Variant parse_variant(std::string_view name) {
  std::string lower(name);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "tdc" || lower == "tde") return Variant::TDC;
  if (lower == "atde") return Variant::ATDE;
  if (lower == "artde") return Variant::ARTDE;
  detail::fail("unknown controller variant '", name, "' (expected tdc, atde or artde)");
}

/// Tracking error (reference minus actual) and its derivative; xi = (e, de).
class ErrorState {
 public:
  ErrorState(Vector e, Vector de) : e_(std::move(e)), de_(std::move(de)) {
    if (e_.size() != de_.size())
      detail::fail("error state dimension mismatch: e has ", e_.size(), ", de has ", de_.size());
    xi_.resize(2 * e_.size());
    xi_ << e_, de_;
  }

  const Vector& e() const { return e_; }
  const Vector& de() const { return de_; }
  const Vector& xi() const { return xi_; }
  Eigen::Index dim() const { return e_.size(); }

 private:
  Vector e_;
  Vector de_;
  Vector xi_;
};

/// Adaptive estimates of the TDE-error bound coefficients (beta0, beta1).
struct GainEstimates {
  double beta0 = 0.01;
  double beta1 = 0.01;
  double floor0 = 0.01;
  double floor1 = 0.01;
  double gamma0 = 1.0;
  double gamma1 = 1.0;

  /// Validated construction: floors and rates positive, estimates at or above floors.
  static GainEstimates make(double beta0, double beta1, double floor0, double floor1,
                            double gamma0, double gamma1) {
    if (!(floor0 > 0.0) || !(floor1 > 0.0))
      detail::fail("gain floors must be positive, got (", floor0, ", ", floor1, ")");
    if (!(gamma0 > 0.0) || !(gamma1 > 0.0))
      detail::fail("adaptation rates must be positive, got (", gamma0, ", ", gamma1, ")");
    if (beta0 < floor0 || beta1 < floor1)
      detail::fail("initial gains (", beta0, ", ", beta1, ") must not start below their floors (",
                   floor0, ", ", floor1, ")");
    return {beta0, beta1, floor0, floor1, gamma0, gamma1};
  }
};

struct ControllerConfig {
  Matrix m_bar;
  Matrix kp;
  Matrix kd;
  Matrix q_lyap;
  double alpha = 4.0;
  double epsilon = 5e-5;
  double period = 0.001;  // control period, equal to the artificial delay L
  Variant variant = Variant::ARTDE;

  Eigen::Index dim() const { return m_bar.rows(); }

  void validate() const {
    detail::require_square(m_bar, "M_bar");
    const auto n = m_bar.rows();
    if (kp.rows() != n || kp.cols() != n || kd.rows() != n || kd.cols() != n)
      detail::fail("gain matrices must be ", n, "x", n);
    if (q_lyap.rows() != 2 * n || q_lyap.cols() != 2 * n)
      detail::fail("Q must be ", 2 * n, "x", 2 * n);
    if (!is_symmetric_positive_definite(m_bar)) detail::fail("M_bar must be symmetric positive definite");
    if (!is_symmetric_positive_definite(kp)) detail::fail("K_P must be symmetric positive definite");
    if (!is_symmetric_positive_definite(kd)) detail::fail("K_D must be symmetric positive definite");
    if (!(alpha > 1.0)) detail::fail("alpha must exceed 1 for the sliding region to exist, got ", alpha);
    if (!(epsilon > 0.0)) detail::fail("epsilon must be positive, got ", epsilon);
    if (!(period > 0.0)) detail::fail("control period L must be positive, got ", period);
  }
};

/// Control input split into its three additive parts.
struct ControlOutput {
  Vector tde_part;
  Vector desired_dynamics_part;
  Vector adaptive_robust_part;
  Vector total;
};

/// u0 = qdd_ref + K_D de + K_P e
inline Vector desired_dynamics(const Vector& qdd_ref, const ErrorState& err,
                               const ControllerConfig& cfg) {
  if (qdd_ref.size() != err.dim() || cfg.kp.rows() != err.dim())
    detail::fail("desired_dynamics: dimension mismatch (ref ", qdd_ref.size(), ", error ", err.dim(),
                 ", gains ", cfg.kp.rows(), ")");
  return qdd_ref + cfg.kd * err.de() + cfg.kp * err.e();
}

/// s = B^T P xi with B = [0; I], i.e. the lower half of P xi.
inline Vector sliding_variable(const Matrix& p, const ErrorState& err) {
  if (p.rows() != 2 * err.dim() || p.cols() != 2 * err.dim())
    detail::fail("sliding_variable: P is ", p.rows(), "x", p.cols(), ", expected ", 2 * err.dim());
  const auto n = err.dim();
  return p.bottomRows(n) * err.xi();
}

/// Smoothed unit vector s / sqrt(|s|^2 + epsilon).
inline Vector sig_smooth(const Vector& s, double epsilon) {
  return s / std::sqrt(s.squaredNorm() + epsilon);
}

/// c = beta0 + beta1 |xi|
inline double switching_gain(const GainEstimates& g, const ErrorState& err) {
  return g.beta0 + g.beta1 * err.xi().norm();
}

enum class AdaptBranch { Increase, Decrease };

/// Which case of the adaptive law applies. Increase when any estimate sits at
/// or below its floor or s^T sdot > 0; decrease otherwise.
inline AdaptBranch adapt_branch(const GainEstimates& g, const Vector& s, const Vector& s_dot) {
  if (g.beta0 <= g.floor0 || g.beta1 <= g.floor1 || s.dot(s_dot) > 0.0) return AdaptBranch::Increase;
  return AdaptBranch::Decrease;
}

/// One explicit Euler step of the (beta0, beta1) adaptive law with
/// sdot ~ (s - s_prev) / dt. A decreasing step never takes an estimate below
/// its floor.
inline GainEstimates adapt_gains(const GainEstimates& g, const ErrorState& err, const Vector& s,
                                 const Vector& s_prev, double dt) {
  if (!(dt > 0.0)) detail::fail("adapt_gains: dt must be positive, got ", dt);
  if (s.size() != s_prev.size()) detail::fail("adapt_gains: s and s_prev differ in size");
  const Vector s_dot = (s - s_prev) / dt;
  const double xi_norm = err.xi().norm();
  const double s_norm = s.norm();
  const double step0 = g.gamma0 * s_norm * dt;
  const double step1 = g.gamma1 * xi_norm * s_norm * dt;

  GainEstimates out = g;
  if (adapt_branch(g, s, s_dot) == AdaptBranch::Increase) {
    out.beta0 += step0;
    out.beta1 += step1;
  } else {
    out.beta0 = std::max(g.beta0 - step0, g.floor0);
    out.beta1 = std::max(g.beta1 - step1, g.floor1);
  }
  return out;
}

/// Scalar switching-gain law of the conventional adaptive TDE baseline:
/// grows while |s| grows (or while c sits at the floor), shrinks otherwise.
inline double atde_gain_update(double c, const Vector& s, double s_prev_norm, double gamma0,
                               double floor, double dt) {
  if (!(dt > 0.0)) detail::fail("atde_gain_update: dt must be positive, got ", dt);
  const double s_norm = s.norm();
  const double step = gamma0 * s_norm * dt;
  if (c <= floor || s_norm - s_prev_norm > 0.0) return c + step;
  return std::max(c - step, floor);
}

/// tau = N_hat + M_bar u0 + M_bar * du, with du = alpha c sig(s, eps) for the
/// adaptive variants and du = 0 for TDC. `c` is the current switching gain.
inline ControlOutput compute_control(const ControllerConfig& cfg, const Matrix& p,
                                     const ErrorState& err, const Vector& qdd_ref,
                                     const Vector& n_hat, double c) {
  if (n_hat.size() != err.dim()) detail::fail("compute_control: N_hat dimension mismatch");
  ControlOutput out;
  out.tde_part = n_hat;
  out.desired_dynamics_part = cfg.m_bar * desired_dynamics(qdd_ref, err, cfg);
  switch (cfg.variant) {
    case Variant::TDC:
      out.adaptive_robust_part = Vector::Zero(err.dim());
      break;
    case Variant::ATDE:
    case Variant::ARTDE: {
      const Vector s = sliding_variable(p, err);
      out.adaptive_robust_part = cfg.m_bar * (cfg.alpha * c * sig_smooth(s, cfg.epsilon));
      break;
    }
    default:
      detail::fail("compute_control: unknown controller variant");
  }
  out.total = out.tde_part + out.desired_dynamics_part + out.adaptive_robust_part;
  return out;
}

/// Radius of the sliding region outside which the robust term dominates:
/// phi = sqrt(eps / (alpha^2 - 1)).
inline double region_radius(double alpha, double epsilon) {
  if (!(alpha > 1.0)) detail::fail("region_radius: alpha must exceed 1, got ", alpha);
  if (!(epsilon >= 0.0)) detail::fail("region_radius: epsilon must be non-negative, got ", epsilon);
  return std::sqrt(epsilon / (alpha * alpha - 1.0));
}

struct MbarCheck {
  bool satisfied = false;
  double worst_norm = 0.0;  // max over samples of ||I - M^{-1} M_bar||_2
};

/// Checks ||I - M^{-1} M_bar||_2 < 1 over sampled inertia matrices.
inline MbarCheck check_mbar_condition(std::span<const Matrix> m_samples, const Matrix& m_bar) {
  if (m_samples.empty()) detail::fail("check_mbar_condition: no inertia samples");
  MbarCheck out;
  for (const Matrix& m : m_samples) {
    if (m.rows() != m_bar.rows() || m.cols() != m_bar.cols())
      detail::fail("check_mbar_condition: sample is ", m.rows(), "x", m.cols(), ", M_bar is ",
                   m_bar.rows(), "x", m_bar.cols());
    Eigen::FullPivLU<Matrix> lu(m);
    if (!lu.isInvertible()) detail::fail("check_mbar_condition: singular inertia sample");
    const Matrix e = Matrix::Identity(m.rows(), m.cols()) - lu.solve(m_bar);
    Eigen::JacobiSVD<Matrix> svd(e);
    out.worst_norm = std::max(out.worst_norm, svd.singularValues()(0));
  }
  out.satisfied = out.worst_norm < 1.0;
  return out;
}

/// Diagnostic bookkeeping from one controller step.
struct LoopStep {
  ControlOutput control;
  Vector n_hat;
  Vector s;
  double switching_gain = 0.0;
  GainEstimates gains;
  double atde_gain = 0.0;
};

/// One artificially delayed control loop: delay line, sliding surface and
/// gain state for a single fully-actuated channel group. Call step() once per
/// control period with strictly increasing times.
class TdeLoop {
 public:
  TdeLoop(ControllerConfig cfg, GainEstimates gains)
      : cfg_(std::move(cfg)),
        gains_(gains),
        atde_gain_(gains.beta0),
        line_(cfg_.period, cfg_.m_bar.rows()) {
    cfg_.validate();
    p_ = lyapunov_solve(companion_matrix(cfg_.kp, cfg_.kd), cfg_.q_lyap);
  }

  /// Replaces the input stored for the last step with what the plant actually
  /// received (e.g. the force realized after thrust extraction).
  void record_applied(const Vector& tau) {
    if (!last_t_) detail::fail("TdeLoop::record_applied called before the first step");
    if (tau.size() != last_tau_.size())
      detail::fail("TdeLoop::record_applied: expected ", last_tau_.size(), " entries, got ", tau.size());
    last_tau_ = tau;
  }

  const ControllerConfig& config() const { return cfg_; }
  const Matrix& lyapunov() const { return p_; }
  const GainEstimates& gains() const { return gains_; }
  double atde_gain() const { return atde_gain_; }

  /// `dq` is the measured velocity of the controlled coordinates; it feeds
  /// the backward-difference acceleration paired with the previous input.
  LoopStep step(double t, const ErrorState& err, const Vector& qdd_ref, const Vector& dq) {
    if (last_t_ && !(t > *last_t_)) detail::fail("TdeLoop::step: time must increase, got ", t);
    if (last_t_) {
      const double dt = t - *last_t_;
      line_.push({*last_t_, last_tau_, estimate_acceleration(prev_dq_, dq, dt)});
    }

    LoopStep out;
    out.n_hat = estimate_N(line_, cfg_.m_bar, t);
    out.s = sliding_variable(p_, err);
    const Vector& s_prev = s_prev_ ? *s_prev_ : out.s;

    double c = 0.0;
    switch (cfg_.variant) {
      case Variant::TDC:
        break;
      case Variant::ATDE:
        atde_gain_ = atde_gain_update(atde_gain_, out.s, s_prev.norm(), gains_.gamma0,
                                      gains_.floor0, cfg_.period);
        c = atde_gain_;
        break;
      case Variant::ARTDE:
        gains_ = adapt_gains(gains_, err, out.s, s_prev, cfg_.period);
        c = switching_gain(gains_, err);
        break;
    }
    out.control = compute_control(cfg_, p_, err, qdd_ref, out.n_hat, c);
    out.switching_gain = c;
    out.gains = gains_;
    out.atde_gain = atde_gain_;

    last_t_ = t;
    last_tau_ = out.control.total;
    prev_dq_ = dq;
    s_prev_ = out.s;
    return out;
  }

 private:
  ControllerConfig cfg_;
  GainEstimates gains_;
  double atde_gain_;
  Matrix p_;
  DelayLine line_;
  std::optional<double> last_t_;
  Vector last_tau_;
  std::optional<Vector> prev_dq_;
  std::optional<Vector> s_prev_;
};

}  // namespace artde

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "artde/chain.hpp"
#include "artde/controllers.hpp"
#include "artde/integrator.hpp"
#include "artde/linalg.hpp"
#include "artde/quadrotor.hpp"
#include "artde/trajectory.hpp"

namespace artde {

enum class PlantKind { Chain, Quadrotor };

inline std::string to_string(PlantKind k) { return k == PlantKind::Chain ? "chain" : "quadrotor"; }

inline PlantKind parse_plant_kind(std::string_view s) {
  if (s == "chain") return PlantKind::Chain;
  if (s == "quadrotor") return PlantKind::Quadrotor;
  detail::fail("unknown plant kind '", s, "' (expected chain or quadrotor)");
}

/// Wind, drag and ground effect acting on the quadrotor. Forces enter as d_p in
/// m p'' + G + d_p = tau_p, so a positive component opposes motion along that
/// axis.
struct QuadDisturbance {
  Vector3 wind_bias = Vector3::Zero();        // N
  Vector3 wind_noise_std = Vector3::Zero();   // N, stationary std of the gust process
  double wind_bandwidth = 0.5;                // Hz, first-order gust filter corner
  double drag = 0.0;                          // N s^2/m^2, d += drag |dp| dp
  double ground_effect_gain = 0.0;            // N m, d_z -= gain / (z + offset)
  double ground_effect_offset = 0.1;          // m
  Vector3 torque_bias = Vector3::Zero();      // N m
  Vector3 torque_noise_std = Vector3::Zero(); // N m
  double rotational_drag = 0.0;               // d_q += k |dq| dq

  void validate() const {
    if (!(wind_bandwidth > 0.0)) detail::fail("wind bandwidth must be positive");
    if ((wind_noise_std.array() < 0.0).any() || (torque_noise_std.array() < 0.0).any())
      detail::fail("noise standard deviations must be non-negative");
    if (!(drag >= 0.0) || !(rotational_drag >= 0.0)) detail::fail("drag coefficients must be non-negative");
    if (!(ground_effect_offset > 0.0)) detail::fail("ground effect offset must be positive");
  }
};

enum class EventKind { PayloadAttach, PayloadDetach, ScaleLinkMass };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::PayloadAttach: return "payload_attach";
    case EventKind::PayloadDetach: return "payload_detach";
    case EventKind::ScaleLinkMass: return "scale_link_mass";
  }
  return "unknown";
}

inline EventKind parse_event_kind(std::string_view s) {
  if (s == "payload_attach") return EventKind::PayloadAttach;
  if (s == "payload_detach") return EventKind::PayloadDetach;
  if (s == "scale_link_mass") return EventKind::ScaleLinkMass;
  detail::fail("unknown event kind '", s, "'");
}

/// A stepwise parameter change at a given time. For payload_attach `value` is
/// the payload mass (kg); for scale_link_mass it is the factor applied to the
/// mass and inertia of `link` (-1 selects the distal link).
struct Event {
  double time = 0.0;
  EventKind kind = EventKind::PayloadDetach;
  double value = 0.0;
  int link = -1;
};

/// Plant parameters after an event. State is untouched by construction.
inline QuadrotorParams apply_event(QuadrotorParams params, const Event& ev) {
  switch (ev.kind) {
    case EventKind::PayloadAttach:
      params.payload_attached = true;
      params.payload_mass = ev.value;
      break;
    case EventKind::PayloadDetach:
      params.payload_attached = false;
      break;
    case EventKind::ScaleLinkMass:
      detail::fail("scale_link_mass does not apply to a quadrotor");
  }
  return params;
}

inline ChainParams apply_event(ChainParams params, const Event& ev) {
  if (ev.kind != EventKind::ScaleLinkMass) detail::fail(to_string(ev.kind), " does not apply to a chain");
  const int n = static_cast<int>(params.links.size());
  const int idx = ev.link < 0 ? n - 1 : ev.link;
  if (idx < 0 || idx >= n) detail::fail("scale_link_mass: link ", ev.link, " out of range");
  if (!(ev.value > 0.0)) detail::fail("scale_link_mass: factor must be positive");
  params.links[idx].mass *= ev.value;
  params.links[idx].inertia *= ev.value;
  return params;
}

/// Controller settings for one loop; `variant` and `period` are filled in
/// from the scenario when the loop is built.
struct LoopSettings {
  ControllerConfig config;
  GainEstimates gains;
};

struct ScenarioConfig {
  std::string name = "scenario";
  PlantKind plant = PlantKind::Chain;
  Variant variant = Variant::ARTDE;

  ChainParams chain;
  DisturbanceProfile chain_disturbance;
  LoopSettings joint;  // chain loop

  QuadrotorParams quad;
  QuadDisturbance quad_disturbance;
  LoopSettings position;  // quadrotor outer loop
  LoopSettings attitude;  // quadrotor inner loop

  TrajectorySpec trajectory;
  std::vector<Event> events;

  double duration = 10.0;
  double dt = 1e-4;              // physics step
  double control_period = 1e-3;  // L
  std::uint64_t seed = 1;
  double divergence_bound = 1e3;  // |dq| above this aborts the run
  double attitude_filter_bandwidth = 18.0;  // rad/s, quadrotor desired-attitude command filter

  Eigen::Index dof() const { return plant == PlantKind::Chain ? chain.dof() : 6; }

  long substeps() const { return std::lround(control_period / dt); }
  long control_steps() const { return static_cast<long>(std::floor(duration / control_period + 1e-9)); }
};

/// Collects every violation instead of stopping at the first.
inline std::vector<std::string> validation_errors(const ScenarioConfig& c) {
  std::vector<std::string> errs;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errs.emplace_back(e.what());
    }
  };
  if (!(c.duration > 0.0)) errs.push_back("duration: must be positive");
  if (!(c.control_period > 0.0)) errs.push_back("control_period: L must be positive");
  if (!(c.dt > 0.0)) errs.push_back("dt: must be positive");
  if (c.dt > 0.0 && c.control_period > 0.0) {
    if (c.dt > c.control_period * (1.0 + 1e-12)) errs.push_back("dt: must not exceed control_period");
    const double ratio = c.control_period / c.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio)
      errs.push_back("dt: control_period must be an integer multiple of dt");
  }
  if (!(c.divergence_bound > 0.0)) errs.push_back("divergence_bound: must be positive");
  if (!(c.attitude_filter_bandwidth > 0.0)) errs.push_back("attitude_filter_bandwidth: must be positive");

  auto check_loop = [&](const LoopSettings& loop, const std::string& where, Eigen::Index n) {
    check([&] {
      ControllerConfig cfg = loop.config;
      if (cfg.m_bar.rows() != n) detail::fail(where, ".m_bar: expected a ", n, "x", n, " matrix");
      cfg.period = c.control_period > 0.0 ? c.control_period : 1.0;
      try {
        cfg.validate();
      } catch (const Error& e) {
        detail::fail(where, ": ", e.what());
      }
    });
    check([&] {
      try {
        GainEstimates::make(loop.gains.beta0, loop.gains.beta1, loop.gains.floor0, loop.gains.floor1,
                            loop.gains.gamma0, loop.gains.gamma1);
      } catch (const Error& e) {
        detail::fail(where, ".gains: ", e.what());
      }
    });
  };

  if (c.plant == PlantKind::Chain) {
    check([&] { c.chain.validate(); });
    const Eigen::Index n = c.chain.dof();
    check([&] { c.chain_disturbance.validate(n); });
    check_loop(c.joint, "controller", n);
    if (c.trajectory.dim() != n) errs.push_back("trajectory: dimension must match the chain");
    for (const Event& ev : c.events)
      check([&] { apply_event(c.chain, ev); });
  } else {
    check([&] { c.quad.validate(); });
    check([&] { c.quad_disturbance.validate(); });
    check_loop(c.position, "position", 3);
    check_loop(c.attitude, "attitude", 3);
    if (c.trajectory.dim() != 3) errs.push_back("trajectory: quadrotor references are 3D");
    for (const Event& ev : c.events)
      check([&] { apply_event(c.quad, ev); });
  }
  check([&] { c.trajectory.validate(); });
  for (const Event& ev : c.events)
    if (ev.time < 0.0) errs.push_back("events: time must be non-negative");
  return errs;
}

inline void validate(const ScenarioConfig& c) {
  const auto errs = validation_errors(c);
  if (errs.empty()) return;
  std::ostringstream oss;
  oss << "invalid scenario '" << c.name << "':";
  for (const auto& e : errs) oss << "\n  - " << e;
  throw Error(oss.str());
}

/// One control period of recorded data. Coordinates are the chain joints, or
/// (x, y, z, phi, theta, psi) for the quadrotor. Loop quantities (s, N_hat,
/// sigma, torque parts) are concatenated over loops in the same order.
struct TraceRow {
  double t = 0.0;
  Vector q, dq, q_ref, dq_ref;
  Vector e, de;  // reference minus actual; angles wrapped
  Vector s;
  Vector n_hat;
  Vector sigma;  // M_bar^{-1} (N - N_hat), N from the true plant
  Vector u;      // auxiliary input M_bar^{-1} (tau - N_hat)
  Vector ddq;    // plant acceleration at the start of the period
  Vector tau_tde, tau_des, tau_rob, tau;
  Vector disturbance;
  Vector gains;  // per loop: beta0, beta1, switching gain c
  double xi_norm = 0.0;
};

struct ScenarioTrace {
  std::string scenario;
  Variant variant = Variant::ARTDE;
  PlantKind plant = PlantKind::Chain;
  double control_period = 0.0;
  double region_radius = 0.0;
  std::vector<std::string> coords;
  std::vector<bool> angular;  // per coordinate, true for angles
  std::vector<std::string> gain_names;
  std::vector<TraceRow> rows;
  std::optional<double> diverged_at;
  std::string divergence_reason;

  bool diverged() const { return diverged_at.has_value(); }
};

namespace detail {

inline ControllerConfig loop_config(const LoopSettings& s, Variant v, double period) {
  ControllerConfig cfg = s.config;
  cfg.variant = v;
  cfg.period = period;
  return cfg;
}

inline Vector loop_gains(const LoopStep& st) {
  Vector g(3);
  g << st.gains.beta0, st.gains.beta1, st.switching_gain;
  return g;
}

// First-order Gauss-Markov gust process advanced once per control period.
class GustProcess {
 public:
  GustProcess(Vector3 stddev, double bandwidth_hz, double period, std::mt19937_64& rng)
      : stddev_(stddev), decay_(std::exp(-2.0 * M_PI * bandwidth_hz * period)), rng_(rng) {
    state_ = Vector3::Zero();
    for (int i = 0; i < 3; ++i) state_(i) = stddev_(i) * normal_(rng_);
  }
  const Vector3& value() const { return state_; }
  void advance() {
    const double drive = std::sqrt(1.0 - decay_ * decay_);
    for (int i = 0; i < 3; ++i) state_(i) = decay_ * state_(i) + drive * stddev_(i) * normal_(rng_);
  }

 private:
  Vector3 stddev_;
  double decay_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vector3 state_;
};

// Critically damped second-order filter on the extracted desired attitude.
// Only its rate and acceleration are used as feedforward; the attitude error
// itself is taken against the unfiltered command. Angle differences are
// wrapped so the filter follows yaw through +-pi.
class AttitudeCommandFilter {
 public:
  explicit AttitudeCommandFilter(double bandwidth) : w_(bandwidth) {}

  void reset(const Vector3& x) {
    x_ = x;
    v_.setZero();
    a_.setZero();
  }

  void update(const Vector3& target, double period) {
    constexpr int substeps = 10;
    const double h = period / substeps;
    for (int k = 0; k < substeps; ++k) {
      Vector3 diff;
      for (int i = 0; i < 3; ++i) diff(i) = wrap_angle(target(i) - x_(i));
      a_ = w_ * w_ * diff - 2.0 * w_ * v_;
      v_ += h * a_;
      x_ += h * v_;
    }
    for (int i = 0; i < 3; ++i) x_(i) = wrap_angle(x_(i));
  }

  const Vector3& position() const { return x_; }
  const Vector3& velocity() const { return v_; }
  const Vector3& acceleration() const { return a_; }

 private:
  double w_;
  Vector3 x_ = Vector3::Zero();
  Vector3 v_ = Vector3::Zero();
  Vector3 a_ = Vector3::Zero();
};

inline Vector3 quad_force_disturbance(const QuadDisturbance& d, const Vector3& gust, const Vector3& p,
                                      const Vector3& dp) {
  Vector3 f = d.wind_bias + gust + d.drag * dp.norm() * dp;
  if (d.ground_effect_gain != 0.0)
    f.z() -= d.ground_effect_gain / (std::max(p.z(), 0.0) + d.ground_effect_offset);
  return f;
}

inline Vector3 quad_torque_disturbance(const QuadDisturbance& d, const Vector3& gust, const Vector3& dq) {
  return d.torque_bias + gust + d.rotational_drag * dq.norm() * dq;
}

inline bool blown_up(const Vector& dq, double bound) { return !dq.allFinite() || dq.norm() > bound; }

inline ScenarioTrace run_chain(const ScenarioConfig& cfg) {
  const Eigen::Index n = cfg.chain.dof();
  const double period = cfg.control_period;
  const long substeps = cfg.substeps();
  const double h = period / static_cast<double>(substeps);

  ScenarioTrace trace;
  trace.scenario = cfg.name;
  trace.variant = cfg.variant;
  trace.plant = PlantKind::Chain;
  trace.control_period = period;
  for (Eigen::Index i = 0; i < n; ++i) {
    trace.coords.push_back("q" + std::to_string(i + 1));
    trace.angular.push_back(true);
  }
  trace.gain_names = {"beta0", "beta1", "c"};

  const ControllerConfig ccfg = loop_config(cfg.joint, cfg.variant, period);
  TdeLoop loop(ccfg, cfg.joint.gains);
  trace.region_radius = region_radius(ccfg.alpha, ccfg.epsilon);
  const Matrix m_bar_inv = ccfg.m_bar.inverse();

  ChainParams params = cfg.chain;
  std::vector<Event> events = cfg.events;
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  std::size_t next_event = 0;

  const TrajectorySample ref0 = sample(cfg.trajectory, 0.0);
  Vector x(2 * n);
  x << ref0.pos, ref0.vel;

  const long steps = cfg.control_steps();
  trace.rows.reserve(static_cast<std::size_t>(steps));
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * period;
    while (next_event < events.size() && events[next_event].time <= t + 1e-12)
      params = apply_event(params, events[next_event++]);

    const Vector q = x.head(n), dq = x.tail(n);
    const TrajectorySample ref = sample(cfg.trajectory, t);
    const ErrorState err(ref.pos - q, ref.vel - dq);
    const LoopStep st = loop.step(t, err, ref.acc, dq);
    const Vector tau = st.control.total;

    // Plant-side diagnostics at the start of the hold interval.
    const Vector d = disturbance_at(cfg.chain_disturbance, t, q, dq);
    const Vector hterms = chain_nonlinear_terms(q, dq, params, d);
    const Matrix m = chain_inertia(q, params);
    const Vector ddq = m.llt().solve(tau - hterms);
    const Vector n_true = (m - ccfg.m_bar) * ddq + hterms;

    TraceRow row;
    row.t = t;
    row.q = q;
    row.dq = dq;
    row.q_ref = ref.pos;
    row.dq_ref = ref.vel;
    row.e = err.e();
    row.de = err.de();
    row.s = st.s;
    row.n_hat = st.n_hat;
    row.sigma = m_bar_inv * (n_true - st.n_hat);
    row.u = m_bar_inv * (tau - st.n_hat);
    row.ddq = ddq;
    row.tau_tde = st.control.tde_part;
    row.tau_des = st.control.desired_dynamics_part;
    row.tau_rob = st.control.adaptive_robust_part;
    row.tau = tau;
    row.disturbance = d;
    row.gains = loop_gains(st);
    row.xi_norm = err.xi().norm();
    trace.rows.push_back(std::move(row));

    auto rhs = [&](double ts, const Vector& xs) {
      const Vector qs = xs.head(n), dqs = xs.tail(n);
      Vector dx(2 * n);
      dx << dqs, chain_dynamics(qs, dqs, tau, params, disturbance_at(cfg.chain_disturbance, ts, qs, dqs));
      return dx;
    };
    for (long j = 0; j < substeps; ++j) x = rk4_step(rhs, t + static_cast<double>(j) * h, x, h);

    if (blown_up(x.tail(n), cfg.divergence_bound)) {
      trace.diverged_at = t + period;
      trace.divergence_reason = "joint speed exceeded the divergence bound";
      break;
    }
  }
  return trace;
}

inline ScenarioTrace run_quadrotor(const ScenarioConfig& cfg) {
  const double period = cfg.control_period;
  const long substeps = cfg.substeps();
  const double h = period / static_cast<double>(substeps);

  ScenarioTrace trace;
  trace.scenario = cfg.name;
  trace.variant = cfg.variant;
  trace.plant = PlantKind::Quadrotor;
  trace.control_period = period;
  trace.coords = {"x", "y", "z", "phi", "theta", "psi"};
  trace.angular = {false, false, false, true, true, true};
  trace.gain_names = {"beta0_p", "beta1_p", "c_p", "beta0_q", "beta1_q", "c_q"};

  const ControllerConfig pcfg = loop_config(cfg.position, cfg.variant, period);
  const ControllerConfig acfg = loop_config(cfg.attitude, cfg.variant, period);
  TdeLoop outer(pcfg, cfg.position.gains);
  TdeLoop inner(acfg, cfg.attitude.gains);
  trace.region_radius = region_radius(pcfg.alpha, pcfg.epsilon);
  const Matrix3 m_bar = pcfg.m_bar;
  const Matrix3 j_bar = acfg.m_bar;
  const Matrix3 m_bar_inv = m_bar.inverse();
  const Matrix3 j_bar_inv = j_bar.inverse();

  QuadrotorParams params = cfg.quad;
  std::vector<Event> events = cfg.events;
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  std::size_t next_event = 0;

  std::mt19937_64 rng(cfg.seed);
  GustProcess wind(cfg.quad_disturbance.wind_noise_std, cfg.quad_disturbance.wind_bandwidth, period, rng);
  GustProcess torque_gust(cfg.quad_disturbance.torque_noise_std, cfg.quad_disturbance.wind_bandwidth,
                          period, rng);

  const TrajectorySample ref0 = sample(cfg.trajectory, 0.0);
  // x = (p, angles, dp, dangles)
  Vector x = Vector::Zero(12);
  x.head(3) = ref0.pos;
  x(5) = ref0.psi;
  x.segment(6, 3) = ref0.vel;

  Matrix3 r_d_prev = euler_to_rotation(0.0, 0.0, ref0.psi);
  AttitudeCommandFilter att_filter(cfg.attitude_filter_bandwidth);

  const long steps = cfg.control_steps();
  trace.rows.reserve(static_cast<std::size_t>(steps));
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * period;
    while (next_event < events.size() && events[next_event].time <= t + 1e-12)
      params = apply_event(params, events[next_event++]);

    QuadrotorState state;
    state.p = x.segment<3>(0);
    state.q = x.segment<3>(3);
    state.dp = x.segment<3>(6);
    state.dq = x.segment<3>(9);
    const TrajectorySample ref = sample(cfg.trajectory, t);

    // Outer loop first.
    const ErrorState err_p(ref.pos - state.p, ref.vel - state.dp);
    const LoopStep out_p = outer.step(t, err_p, ref.acc, state.dp);
    const Vector3 tau_p = out_p.control.total;

    // Thrust extraction and desired attitude.
    const Matrix3 r = euler_to_rotation(state.q);
    const double u1 = std::max(0.0, thrust_from_tau_p(tau_p, r));
    const Vector3 force = u1 * r.col(2);
    outer.record_applied(force);
    Matrix3 r_d = r_d_prev;
    if (tau_p.norm() > 1e-6) {
      try {
        r_d = desired_attitude(tau_p, ref.psi);
      } catch (const Error&) {
        r_d = r_d_prev;
      }
    }
    r_d_prev = r_d;
    const Vector3 att_raw = rotation_to_euler(r_d);
    if (k == 0) att_filter.reset(att_raw);
    att_filter.update(att_raw, period);
    Vector3 datt_d = att_filter.velocity();
    Vector3 ddatt_d = att_filter.acceleration();
    datt_d.z() = ref.dpsi;
    ddatt_d.z() = 0.0;
    // Inner loop on the rotation-matrix attitude error (sign flipped to
    // reference-minus-actual).
    const auto [e_q, de_q] = attitude_error(r_d, r, state.dq, datt_d);
    const ErrorState err_q(-e_q, -de_q);
    const LoopStep out_q = inner.step(t, err_q, ddatt_d, state.dq);
    const Vector3 tau_q = out_q.control.total;

    // Plant-side diagnostics.
    const Vector3 d_p = quad_force_disturbance(cfg.quad_disturbance, wind.value(), state.p, state.dp);
    const Vector3 d_q = quad_torque_disturbance(cfg.quad_disturbance, torque_gust.value(), state.dq);
    const Vector3 ddp = position_dynamics(state, params, force, d_p);
    const Vector3 ddatt = attitude_dynamics(state, params, tau_q, d_q);
    const double m_eff = params.effective_mass();
    const Vector3 gravity(0.0, 0.0, m_eff * params.gravity);
    const Vector3 n_p = (m_eff * Matrix3::Identity() - m_bar) * ddp + gravity + d_p;
    const Matrix3 j = attitude_inertia(state.q, params);
    const Vector3 n_q = (j - j_bar) * ddatt + attitude_coriolis(state.q, state.dq, params) * state.dq + d_q;

    TraceRow row;
    row.t = t;
    row.q = x.head(6);
    row.dq = x.tail(6);
    row.q_ref = Vector(6);
    row.q_ref << ref.pos, att_raw;
    row.dq_ref = Vector(6);
    row.dq_ref << ref.vel, datt_d;
    row.e = row.q_ref - row.q;
    for (int i = 3; i < 6; ++i) row.e(i) = wrap_angle(row.e(i));
    row.de = row.dq_ref - row.dq;
    auto cat = [](const Vector& a, const Vector& b) {
      Vector v(a.size() + b.size());
      v << a, b;
      return v;
    };
    row.s = cat(out_p.s, out_q.s);
    row.n_hat = cat(out_p.n_hat, out_q.n_hat);
    row.sigma = cat(m_bar_inv * (n_p - out_p.n_hat), j_bar_inv * (n_q - out_q.n_hat));
    row.u = cat(m_bar_inv * (tau_p - out_p.n_hat), j_bar_inv * (tau_q - out_q.n_hat));
    row.ddq = cat(ddp, ddatt);
    row.tau_tde = cat(out_p.control.tde_part, out_q.control.tde_part);
    row.tau_des = cat(out_p.control.desired_dynamics_part, out_q.control.desired_dynamics_part);
    row.tau_rob = cat(out_p.control.adaptive_robust_part, out_q.control.adaptive_robust_part);
    row.tau = cat(tau_p, tau_q);
    row.disturbance = cat(d_p, d_q);
    row.gains = cat(loop_gains(out_p), loop_gains(out_q));
    row.xi_norm = std::sqrt(err_p.xi().squaredNorm() + err_q.xi().squaredNorm());
    trace.rows.push_back(std::move(row));

    const Vector3 wind_now = wind.value();
    const Vector3 gust_now = torque_gust.value();
    auto rhs = [&](double, const Vector& xs) {
      QuadrotorState s;
      s.p = xs.segment<3>(0);
      s.q = xs.segment<3>(3);
      s.dp = xs.segment<3>(6);
      s.dq = xs.segment<3>(9);
      const Vector3 f = u1 * euler_to_rotation(s.q).col(2);
      Vector dx(12);
      dx << s.dp, s.dq,
          position_dynamics(s, params, f, quad_force_disturbance(cfg.quad_disturbance, wind_now, s.p, s.dp)),
          attitude_dynamics(s, params, tau_q, quad_torque_disturbance(cfg.quad_disturbance, gust_now, s.dq));
      return dx;
    };
    try {
      for (long j2 = 0; j2 < substeps; ++j2) x = rk4_step(rhs, t + static_cast<double>(j2) * h, x, h);
    } catch (const Error& e) {
      trace.diverged_at = t + period;
      trace.divergence_reason = e.what();
      break;
    }
    wind.advance();
    torque_gust.advance();

    if (blown_up(x.tail(6), cfg.divergence_bound)) {
      trace.diverged_at = t + period;
      trace.divergence_reason = "body speed exceeded the divergence bound";
      break;
    }
    if (std::abs(x(4)) > 0.5 * M_PI - 1e-3) {
      trace.diverged_at = t + period;
      trace.divergence_reason = "pitch reached the Euler-angle singularity";
      break;
    }
  }
  return trace;
}

}  // namespace detail

/// Runs one closed-loop scenario: per control period the controller reads the
/// state, adapts its gains and computes tau; tau is then held while the plant
/// is integrated with RK4 substeps. Deterministic for a given config and seed.
inline ScenarioTrace run(const ScenarioConfig& cfg) {
  validate(cfg);
  return cfg.plant == PlantKind::Chain ? detail::run_chain(cfg) : detail::run_quadrotor(cfg);
}

/// Runs independent scenarios on up to `workers` threads. Results keep input order.
inline std::vector<ScenarioTrace> run_batch(const std::vector<ScenarioConfig>& configs, unsigned workers) {
  std::vector<ScenarioTrace> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(configs.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i] = run(configs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// CSV trace, one row per control period, 17 significant digits. Column
/// order: t; per coordinate q, dq, q_ref, dq_ref, e, de; per loop channel s,
/// n_hat, sigma, tau_tde, tau_des, tau_rob, tau, d; the gain columns; xi_norm.
inline void write_trace_csv(std::ostream& os, const ScenarioTrace& trace, std::size_t stride = 1) {
  stride = std::max<std::size_t>(stride, 1);
  const auto& c = trace.coords;
  os << "t";
  for (const char* group : {"q", "dq", "q_ref", "dq_ref", "e", "de"})
    for (const auto& name : c) os << ',' << group << '_' << name;
  for (const char* group : {"s", "n_hat", "sigma", "tau_tde", "tau_des", "tau_rob", "tau", "d"})
    for (const auto& name : c) os << ',' << group << '_' << name;
  for (const auto& g : trace.gain_names) os << ',' << g;
  os << ",xi_norm\n";

  const auto old_precision = os.precision();
  os << std::setprecision(17);
  auto put = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << v(i);
  };
  for (std::size_t k = 0; k < trace.rows.size(); k += stride) {
    const TraceRow& r = trace.rows[k];
    os << r.t;
    for (const Vector* v : {&r.q, &r.dq, &r.q_ref, &r.dq_ref, &r.e, &r.de, &r.s, &r.n_hat, &r.sigma,
                            &r.tau_tde, &r.tau_des, &r.tau_rob, &r.tau, &r.disturbance, &r.gains})
      put(*v);
    os << ',' << r.xi_norm << '\n';
  }
  os.precision(old_precision);
}

}  // namespace artde

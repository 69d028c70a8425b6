#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "artde/sim.hpp"

namespace artde {

namespace detail {

inline ControllerConfig chain_controller(Eigen::Index n) {
  ControllerConfig c;
  c.m_bar = 0.042 * Matrix::Identity(n, n);
  c.kp = 25.0 * Matrix::Identity(n, n);
  c.kd = 10.0 * Matrix::Identity(n, n);
  c.q_lyap = Matrix::Identity(2 * n, 2 * n);
  c.alpha = 4.0;
  c.epsilon = 5e-5;
  return c;
}

// Three-link leg (thigh, shank, foot) walking with a 2 s stride.
inline ScenarioConfig walking_leg(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.plant = PlantKind::Chain;
  c.duration = 60.0;
  c.control_period = 0.001;
  c.dt = 0.0001;
  c.chain.links = {{1.2, 0.25, 0.12, 0.006}, {0.9, 0.25, 0.12, 0.0047}, {0.4, 0.10, 0.05, 0.0005}};
  c.chain.friction = Vector::Constant(3, 0.05);
  c.chain.armature = Vector::Constant(3, 0.04);
  c.chain_disturbance = DisturbanceProfile::none(3);

  Impulse grf;
  grf.start = 0.9;
  grf.duration = 0.08;
  grf.peak = 6.0;
  grf.mask = Vector(3);
  grf.mask << 0.4, 0.7, 1.0;
  grf.shape = PulseShape::HalfSine;
  grf.repeat_period = 2.0;
  c.chain_disturbance.impulses.push_back(grf);

  c.joint.config = chain_controller(3);
  c.joint.gains = {0.01, 0.01, 0.01, 0.01, 1e4, 1e4};

  c.trajectory.kind = TrajectoryKind::JointSinusoid;
  c.trajectory.period = 2.0;
  c.trajectory.ramp = 1.0;
  c.trajectory.amplitudes = Vector(3);
  c.trajectory.amplitudes << 0.35, 0.45, 0.20;
  c.trajectory.offsets = Vector(3);
  c.trajectory.offsets << 0.05, 0.45, -0.15;
  c.trajectory.phases = Vector(3);
  c.trajectory.phases << 0.0, -M_PI / 2.0, M_PI / 2.0;
  return c;
}

}  // namespace detail

/// Gait with periodic ground-contact pulses only.
inline ScenarioConfig preset_chain_s1() { return detail::walking_leg("chain-s1"); }

/// Gait carrying a payload (distal mass +15% from t = 0) under a
/// state-dependent disturbance d = D0 q + D1 |dq| dq.
inline ScenarioConfig preset_chain_s2() {
  ScenarioConfig c = detail::walking_leg("chain-s2");
  c.events.push_back({0.0, EventKind::ScaleLinkMass, 1.15, -1});
  c.chain_disturbance.d0 = -500.0 * Matrix::Identity(3, 3);
  c.chain_disturbance.d1 = 0.5 * Matrix::Identity(3, 3);
  return c;
}

/// The chain-s2 conditions plus two pushes opening phases at 28 s and 37 s.
inline ScenarioConfig preset_chain_s3() {
  ScenarioConfig c = preset_chain_s2();
  c.name = "chain-s3";
  Impulse push;
  push.start = 28.0;
  push.duration = 0.1;
  push.peak = 10.0;  // N, mapped to joint torques through the mask (moment arms, m)
  push.mask = Vector(3);
  push.mask << 0.45, 0.25, 0.05;
  push.shape = PulseShape::Rectangular;
  c.chain_disturbance.impulses.push_back(push);
  push.start = 37.0;
  push.mask *= std::cos(M_PI / 4.0);
  c.chain_disturbance.impulses.push_back(push);
  return c;
}

/// Two-loop figure-eight flight starting at the crossing point with a payload
/// that is released at the crossing (t = 35 s), under fan wind and ground effect.
inline ScenarioConfig preset_quad_infinity() {
  ScenarioConfig c;
  c.name = "quad-infinity";
  c.plant = PlantKind::Quadrotor;
  c.duration = 70.0;
  c.control_period = 0.015;
  c.dt = 0.0015;
  c.seed = 7;
  c.attitude_filter_bandwidth = 18.0;

  c.quad = QuadrotorParams{};
  c.quad.payload_attached = true;
  c.events.push_back({35.0, EventKind::PayloadDetach, 0.0, -1});

  auto& d = c.quad_disturbance;
  d.wind_bias = Vector3(0.1, 0.6, 0.0);
  d.wind_noise_std = Vector3(0.2, 0.6, 0.3);
  d.wind_bandwidth = 0.5;
  d.drag = 0.1;
  d.ground_effect_gain = 0.4;
  d.ground_effect_offset = 0.1;
  d.torque_bias = Vector3(0.002, 0.002, 0.0);
  d.torque_noise_std = Vector3(0.003, 0.003, 0.001);
  d.rotational_drag = 0.001;

  auto loop = [](double m_bar) {
    LoopSettings s;
    s.config.m_bar = m_bar * Matrix::Identity(3, 3);
    s.config.kp = 10.0 * Matrix::Identity(3, 3);
    s.config.kd = 5.0 * Matrix::Identity(3, 3);
    s.config.q_lyap = Matrix::Identity(6, 6);
    s.config.alpha = 4.0;
    s.config.epsilon = 5e-5;
    s.gains = {0.01, 0.01, 0.01, 0.01, 1.0, 1.0};
    return s;
  };
  c.position = loop(1.0);
  c.attitude = loop(0.015);

  c.trajectory.kind = TrajectoryKind::Lemniscate3d;
  c.trajectory.period = 70.0;
  c.trajectory.ramp = 3.0;
  c.trajectory.amplitudes = Vector3(1.2, 0.6, 0.25);
  c.trajectory.offsets = Vector3(0.0, 0.0, 0.8);
  c.trajectory.phases = Vector();
  return c;
}

inline std::vector<std::string> preset_names() { return {"chain-s1", "chain-s2", "chain-s3", "quad-infinity"}; }

inline ScenarioConfig builtin_preset(const std::string& name) {
  if (name == "chain-s1") return preset_chain_s1();
  if (name == "chain-s2") return preset_chain_s2();
  if (name == "chain-s3") return preset_chain_s3();
  if (name == "quad-infinity") return preset_quad_infinity();
  detail::fail("unknown preset '", name, "' (available: chain-s1, chain-s2, chain-s3, quad-infinity)");
}

}  // namespace artde

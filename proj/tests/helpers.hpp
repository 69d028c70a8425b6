#pragma once

#include <random>

#include "artde/presets.hpp"
#include "artde/sim.hpp"

namespace artde::testing {

inline ChainParams two_link(double gravity = 9.81) {
  ChainParams p;
  p.links = {{1.0, 0.3, 0.15, 0.0075}, {0.7, 0.25, 0.12, 0.004}};
  p.friction = Vector::Zero(2);
  p.gravity = gravity;
  return p;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Undisturbed two-link chain holding the hanging equilibrium.
inline ScenarioConfig hold_scenario(Variant v) {
  ScenarioConfig c;
  c.name = "hold";
  c.plant = PlantKind::Chain;
  c.variant = v;
  c.duration = 2.0;
  c.chain = two_link();
  c.chain.armature = Vector::Constant(2, 0.04);
  c.chain_disturbance = DisturbanceProfile::none(2);
  c.joint.config = detail::chain_controller(2);
  c.trajectory.kind = TrajectoryKind::Hold;
  c.trajectory.offsets = Vector::Zero(2);
  return c;
}

/// Two-link chain tracking a sinusoid under a mild bias disturbance.
inline ScenarioConfig tracking_scenario(Variant v, double duration = 3.0) {
  ScenarioConfig c = hold_scenario(v);
  c.name = "track";
  c.duration = duration;
  c.chain_disturbance.bias = Vector::Constant(2, 0.3);
  c.trajectory.kind = TrajectoryKind::JointSinusoid;
  c.trajectory.period = 2.0;
  c.trajectory.ramp = 0.5;
  c.trajectory.amplitudes = Vector::Constant(2, 0.3);
  c.trajectory.offsets = Vector::Constant(2, 0.2);
  c.trajectory.phases = Vector::Zero(2);
  return c;
}

/// Calm hover of the unloaded quadrotor at 1 m.
inline ScenarioConfig hover_scenario(Variant v) {
  ScenarioConfig c = preset_quad_infinity();
  c.name = "hover";
  c.variant = v;
  c.duration = 10.0;
  c.events.clear();
  c.quad.payload_attached = false;
  c.quad_disturbance = QuadDisturbance{};
  c.trajectory = TrajectorySpec{};
  c.trajectory.kind = TrajectoryKind::Hold;
  c.trajectory.offsets = Vector3(0.0, 0.0, 1.0);
  return c;
}

}  // namespace artde::testing

#pragma once

#include <concepts>

#include "artde/linalg.hpp"

namespace artde {

/// Classical fourth-order Runge-Kutta step for x' = f(t, x).
template <typename F>
  requires std::invocable<F, double, const Vector&>
Vector rk4_step(F&& f, double t, const Vector& x, double h) {
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + 0.5 * h, x + (0.5 * h) * k1);
  const Vector k3 = f(t + 0.5 * h, x + (0.5 * h) * k2);
  const Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates over [t0, t0 + steps * h] with fixed steps.
template <typename F>
Vector rk4_integrate(F&& f, double t0, Vector x, double h, long steps) {
  for (long k = 0; k < steps; ++k) x = rk4_step(f, t0 + static_cast<double>(k) * h, x, h);
  return x;
}

}  // namespace artde

#pragma once

#include <stdexcept>

namespace trms {

// One classical 4-stage Runge-Kutta step of x' = rhs(x) over dt.
// Works for any vector type with +, scalar * (Eigen vectors, scalars).
template <typename Vector, typename Rhs>
Vector rk4_step(Rhs&& rhs, const Vector& x, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("rk4_step: dt must be positive");
  }
  const Vector k1 = rhs(x);
  const Vector k2 = rhs(Vector(x + (0.5 * dt) * k1));
  const Vector k3 = rhs(Vector(x + (0.5 * dt) * k2));
  const Vector k4 = rhs(Vector(x + dt * k3));
  return Vector(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

// Time-varying variant: rhs(t, x), stages evaluated at t, t + dt/2, t + dt.
template <typename Vector, typename Rhs>
Vector rk4_step(Rhs&& rhs, double t, const Vector& x, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("rk4_step: dt must be positive");
  }
  const double half = 0.5 * dt;
  const Vector k1 = rhs(t, x);
  const Vector k2 = rhs(t + half, Vector(x + half * k1));
  const Vector k3 = rhs(t + half, Vector(x + half * k2));
  const Vector k4 = rhs(t + dt, Vector(x + dt * k3));
  return Vector(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace trms

#pragma once

// Nonlinear twin-rotor (TRMS) plant: rotor maps, torques, the six-state
// vector field, RK4 propagation and equilibrium (trim) search.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trms/errors.hpp"
#include "trms/integrate.hpp"

namespace trms {

// x = [alpha_v, S_v, u_vv, alpha_h, S_h, u_hh]
using PlantState = Eigen::Matrix<double, 6, 1>;
// u = [u_v, u_h] (V)
using ControlInput = Eigen::Vector2d;

inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 2;

namespace idx {
inline constexpr int kPitch = 0;          // alpha_v
inline constexpr int kPitchMomentum = 1;  // S_v
inline constexpr int kMainMotor = 2;      // u_vv
inline constexpr int kYaw = 3;            // alpha_h
inline constexpr int kYawMomentum = 4;    // S_h
inline constexpr int kTailMotor = 5;      // u_hh
}  // namespace idx

enum class Rotor { main, tail };

// Polynomial with no constant term: coeffs[k] multiplies x^(k+1).
struct OriginPolynomial {
  std::vector<double> coeffs;

  double operator()(double x) const {
    double r = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
      r = r * x + *it;
    }
    return r * x;
  }

  double derivative(double x) const {
    double r = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) {
      r = r * x + static_cast<double>(k + 1) * coeffs[k];
    }
    return r;
  }
};

// Physical constants of the rig. Defaults are the published TRMS values.
struct TrmsParams {
  double a_const = 0.0946875;
  double b_const = 0.11046;
  double c_const = 0.01986;
  double d_const = 0.04988;
  double e_const = 0.004745;
  double f_const = 0.006230;
  double h_const = 0.048210;
  double s_f = 0.000843318;
  double j_v = 0.055448;
  double j_mr = 0.000016543;
  double j_tr = 0.0000265;
  double l_m = 0.24;
  double l_t = 0.25;
  double t_mr = 1.432;
  double t_tr = 0.3842;
  double k_mr = 1.0;
  double k_tr = 1.0;
  double k_v = 0.0095;
  double k_h = 0.00545371;
  double g = 9.81;

  // omega_m(u_vv), omega_t(u_hh): rad/s from internal motor voltage.
  OriginPolynomial speed_main{{1238.41, 63.45, -1238.64, -129.26, 599.73, 90.90}};
  OriginPolynomial speed_tail{{3796.83, -262.87, -4283.15, 194.69, 2020.0}};
  // F_v(omega_m), F_h(omega_t). The tail linear term (0.8080) is taken as
  // printed even though it is ~8x the main-rotor one; override via config.
  OriginPolynomial thrust_main{{9.544e-2, -1.632e-4, 4.123e-6, 1.09e-9, -3.48e-12}};
  OriginPolynomial thrust_tail{{0.8080, -1.808e-4, 2.511e-7, 1.595e-11, -3e-14}};

  // Throws std::invalid_argument naming the first violated invariant.
  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("TrmsParams: ") + name + " must be finite and > 0");
      }
    };
    positive(j_v, "j_v");
    positive(j_mr, "j_mr");
    positive(j_tr, "j_tr");
    positive(t_mr, "t_mr");
    positive(t_tr, "t_tr");
    positive(l_m, "l_m");
    positive(l_t, "l_t");
    positive(g, "g");
    // min over alpha of D cos^2 + E sin^2 + F is min(D, E) + F.
    if (!(std::min(d_const, e_const) + f_const > 0.0)) {
      throw std::invalid_argument("TrmsParams: D cos^2 + E sin^2 + F must stay positive");
    }
    for (const auto* poly : {&speed_main, &speed_tail, &thrust_main, &thrust_tail}) {
      for (double c : poly->coeffs) {
        if (!std::isfinite(c)) {
          throw std::invalid_argument("TrmsParams: non-finite polynomial coefficient");
        }
      }
    }
  }
};

namespace detail {
inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}
}  // namespace detail

// Propeller angular velocity (rad/s) for an internal motor voltage.
inline double rotor_speed(Rotor rotor, double u_internal, const TrmsParams& p) {
  detail::require_finite(u_internal, "rotor_speed");
  return rotor == Rotor::main ? p.speed_main(u_internal) : p.speed_tail(u_internal);
}

// Propulsive force (N) for a propeller angular velocity.
inline double thrust(Rotor rotor, double omega, const TrmsParams& p) {
  detail::require_finite(omega, "thrust");
  return rotor == Rotor::main ? p.thrust_main(omega) : p.thrust_tail(omega);
}

// Return torque from gravity, M_v1.
inline double gravity_torque(double alpha_v, const TrmsParams& p) {
  return p.g * ((p.a_const - p.b_const) * std::cos(alpha_v) - p.c_const * std::sin(alpha_v));
}

// Centrifugal torque M_v3 from yaw rate omega_h.
inline double centrifugal_torque(double alpha_v, double omega_h, const TrmsParams& p) {
  return -omega_h * omega_h * p.h_const * std::sin(alpha_v) * std::cos(alpha_v);
}

inline double horizontal_inertia(double alpha_v, const TrmsParams& p) {
  const double c = std::cos(alpha_v);
  const double s = std::sin(alpha_v);
  return p.d_const * c * c + p.e_const * s * s + p.f_const;
}

struct AngularRates {
  double pitch;  // Omega_v
  double yaw;    // Omega_h
};

// Beam angular rates including the rotor gyroscopic cross terms.
inline AngularRates angular_rates(const PlantState& x, const TrmsParams& p) {
  const double w_m = p.speed_main(x[idx::kMainMotor]);
  const double w_t = p.speed_tail(x[idx::kTailMotor]);
  const double a = x[idx::kPitch];
  return {x[idx::kPitchMomentum] + p.j_tr * w_t / p.j_v,
          x[idx::kYawMomentum] + p.j_mr * w_m * std::cos(a) / horizontal_inertia(a, p)};
}

// State derivative of the nonlinear plant. `input` is applied as given;
// callers saturate it.
inline PlantState dynamics(const PlantState& x, const ControlInput& input, const TrmsParams& p) {
  const double a = x[idx::kPitch];
  const double ca = std::cos(a);
  const double sa = std::sin(a);
  const double w_m = p.speed_main(x[idx::kMainMotor]);
  const double w_t = p.speed_tail(x[idx::kTailMotor]);
  const double j_h = p.d_const * ca * ca + p.e_const * sa * sa + p.f_const;
  const double omega_v = x[idx::kPitchMomentum] + p.j_tr * w_t / p.j_v;
  const double omega_h = x[idx::kYawMomentum] + p.j_mr * w_m * ca / j_h;

  PlantState dx;
  dx[idx::kPitch] = omega_v;
  dx[idx::kPitchMomentum] =
      (p.l_m * p.s_f * p.thrust_main(w_m) - p.k_v * omega_v + gravity_torque(a, p) -
       omega_h * omega_h * p.h_const * sa * ca) /
      p.j_v;
  dx[idx::kMainMotor] = (-x[idx::kMainMotor] + p.k_mr * input[0]) / p.t_mr;
  dx[idx::kYaw] = omega_h;
  dx[idx::kYawMomentum] = (p.l_t * p.s_f * p.thrust_tail(w_t) * ca - p.k_h * omega_h) / j_h;
  dx[idx::kTailMotor] = (-x[idx::kTailMotor] + p.k_tr * input[1]) / p.t_tr;
  return dx;
}

// One RK4 step with the input held over [t, t + dt].
inline PlantState step(const PlantState& x, const ControlInput& input, double dt, const TrmsParams& p) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("plant step: dt must be positive");
  }
  return rk4_step([&](const PlantState& s) { return dynamics(s, input, p); }, x, dt);
}

inline ControlInput saturate(const ControlInput& u, double limit) {
  return u.cwiseMax(-limit).cwiseMin(limit);
}

struct Trim {
  PlantState state;
  ControlInput input;
};

// Equilibrium at fixed pitch/yaw angles. The tail channel must produce zero
// horizontal thrust (u_h* = 0), so only u_v* is searched: the root of the
// net pitch torque closest to zero inside [-u_limit, u_limit].
inline Trim trim(double alpha_v_ref, double alpha_h_ref, const TrmsParams& p, double u_limit = 2.5) {
  detail::require_finite(alpha_v_ref, "trim");
  detail::require_finite(alpha_h_ref, "trim");
  if (std::abs(std::cos(alpha_v_ref)) < 1e-6) {
    throw InfeasibleTrim("trim: pitch at +-pi/2 leaves yaw uncontrollable");
  }

  auto pitch_torque = [&](double u_v) {
    return p.l_m * p.s_f * p.thrust_main(p.speed_main(p.k_mr * u_v)) + gravity_torque(alpha_v_ref, p);
  };

  constexpr int kGrid = 4000;
  double best_lo = 0.0;
  double best_hi = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  bool exact = false;
  double exact_root = 0.0;
  double prev_u = -u_limit;
  double prev_t = pitch_torque(prev_u);
  for (int i = 1; i <= kGrid; ++i) {
    const double u = -u_limit + 2.0 * u_limit * i / kGrid;
    const double t = pitch_torque(u);
    if (prev_t == 0.0 && std::abs(prev_u) < best_dist) {
      exact = true;
      exact_root = prev_u;
      best_dist = std::abs(prev_u);
    } else if ((prev_t < 0.0) != (t < 0.0) && t != 0.0) {
      const double dist = std::min(std::abs(prev_u), std::abs(u));
      const bool straddles_zero = prev_u <= 0.0 && u >= 0.0;
      const double d = straddles_zero ? 0.0 : dist;
      if (d < best_dist) {
        exact = false;
        best_lo = prev_u;
        best_hi = u;
        best_dist = d;
      }
    }
    prev_u = u;
    prev_t = t;
  }
  if (prev_t == 0.0 && std::abs(prev_u) < best_dist) {
    exact = true;
    exact_root = prev_u;
    best_dist = std::abs(prev_u);
  }
  if (!std::isfinite(best_dist)) {
    throw InfeasibleTrim("trim: no input in [-" + std::to_string(u_limit) + ", " + std::to_string(u_limit) +
                         "] V balances pitch " + std::to_string(alpha_v_ref) + " rad");
  }

  double u_v = exact_root;
  if (!exact) {
    double lo = best_lo;
    double hi = best_hi;
    double t_lo = pitch_torque(lo);
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon(); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double t_mid = pitch_torque(mid);
      if (t_mid == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((t_mid < 0.0) == (t_lo < 0.0)) {
        lo = mid;
        t_lo = t_mid;
      } else {
        hi = mid;
      }
    }
    u_v = std::abs(pitch_torque(lo)) <= std::abs(pitch_torque(hi)) ? lo : hi;
  }

  Trim out;
  out.input = ControlInput(u_v, 0.0);
  out.state.setZero();
  out.state[idx::kPitch] = alpha_v_ref;
  out.state[idx::kMainMotor] = p.k_mr * u_v;
  out.state[idx::kYaw] = alpha_h_ref;
  out.state[idx::kPitchMomentum] = -p.j_tr * p.speed_tail(0.0) / p.j_v;
  out.state[idx::kYawMomentum] =
      -p.j_mr * p.speed_main(p.k_mr * u_v) * std::cos(alpha_v_ref) / horizontal_inertia(alpha_v_ref, p);
  return out;
}

// Zero of the gravity torque: the pitch the beam rests at with no thrust.
inline double rest_angle(const TrmsParams& p) {
  return std::atan2(p.a_const - p.b_const, p.c_const);
}

}  // namespace trms

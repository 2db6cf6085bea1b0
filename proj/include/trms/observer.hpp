#pragma once

// Online multi-observer: the unknown-input observer producing x_hat_f and
// the algebraic fault reconstruction f_hat, the fault-free Luenberger
// observer producing x_hat, and the filtered output differentiator that
// supplies y_dot.

#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "trms/integrate.hpp"
#include "trms/multimodel.hpp"
#include "trms/synthesis.hpp"

namespace trms {

inline constexpr double kDefaultDerivTau = 0.01;

// Filter states for G(s) = s / (tau s + 1). The last raw sample is implied:
// y_raw = y_filt + tau * y_dot.
struct DerivFilterState {
  VectorXd y_filt;
  VectorXd y_dot;
};

inline DerivFilterState deriv_filter_init(const VectorXd& y0) {
  return {y0, VectorXd::Zero(y0.size())};
}

struct DerivFilterOutput {
  DerivFilterState state;
  VectorXd y_dot;
};

// Exact discretization of the lag z' = (y - z) / tau for y linear between
// samples, so ramps are differentiated without bias.
inline DerivFilterOutput deriv_filter_step(const DerivFilterState& st, const VectorXd& y, double dt, double tau_f) {
  if (!(dt > 0.0) || !(tau_f > 0.0)) {
    throw std::invalid_argument("deriv_filter_step: dt and tau_f must be positive");
  }
  if (y.size() != st.y_filt.size()) {
    throw std::invalid_argument("deriv_filter_step: output dimension changed");
  }
  const VectorXd y_prev = st.y_filt + tau_f * st.y_dot;
  const double decay = std::exp(-dt / tau_f);
  const double beta = (tau_f / dt) * (1.0 - decay);
  DerivFilterState next;
  next.y_filt = decay * st.y_filt + y - decay * y_prev - beta * (y - y_prev);
  next.y_dot = (y - next.y_filt) / tau_f;
  VectorXd out = next.y_dot;
  return {std::move(next), std::move(out)};
}

namespace detail {
inline void check_observer_dims(const Design& d, const ModelBank& bank, const VectorXd& mu) {
  if (d.uio.h_proj.size() != bank.size() || d.uio.k2.size() != bank.size()) {
    throw std::invalid_argument("observer: design and bank sizes differ");
  }
  require_convex(mu, bank.size(), "observer");
}
}  // namespace detail

// f_hat = sum_i mu_i H_i (y_dot - C (A_i x_hat_f + B_i u_f + dX_i))
inline VectorXd fault_estimate(const Design& d, const ModelBank& bank, const VectorXd& mu, const VectorXd& y_dot,
                               const VectorXd& x_hat_f, const VectorXd& u_f) {
  detail::check_observer_dims(d, bank, mu);
  const auto& ref = bank.models.front();
  if (y_dot.size() != ref.p() || x_hat_f.size() != ref.n() || u_f.size() != ref.m()) {
    throw std::invalid_argument("fault_estimate: dimension mismatch");
  }
  VectorXd f_hat = VectorXd::Zero(ref.s());
  if (ref.s() == 0) return f_hat;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    const auto& m = bank.models[i];
    f_hat += w * d.uio.h_proj[i] * (y_dot - m.c * (m.a * x_hat_f + m.b * u_f + m.delta_x));
  }
  return f_hat;
}

// Continuous-time fault-state estimator with f_hat evaluated from the current
// estimate and a given output derivative:
//   x_hat_f' = sum mu_i (A_i x + B_i u_f + L_i f_hat + dX_i + K2_i (y - C x))
// For a single model this equals (A_bar - K2 C) acting on the error, so the
// estimation error does not see the fault when y_dot is exact.
inline VectorXd uio_derivative(const Design& d, const ModelBank& bank, const VectorXd& mu, const VectorXd& x_hat_f,
                               const VectorXd& u_f, const VectorXd& y, const VectorXd& y_dot) {
  const VectorXd f_hat = fault_estimate(d, bank, mu, y_dot, x_hat_f, u_f);
  VectorXd dx = VectorXd::Zero(x_hat_f.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    const auto& m = bank.models[i];
    dx += w * (m.derivative(x_hat_f, u_f, f_hat) + d.uio.k2[i] * (y - m.c * x_hat_f));
  }
  return dx;
}

struct ObserverState {
  VectorXd x_hat_f;
  VectorXd f_hat;
  DerivFilterState deriv_filter;
  // Model-predicted output derivative C (A x_hat_f + B u_f + dX) passed
  // through the same lag as y_dot, so f_hat compares like with like.
  VectorXd predicted_y_dot;
  // Last output sample and the previous step's increment of y - C B_bar int(u)
  // (empty until one step has been taken).
  VectorXd y_prev;
  std::optional<VectorXd> residual_step;
};

inline ObserverState observer_init(const VectorXd& x_hat_f0, const VectorXd& y0, Eigen::Index fault_dim) {
  return {x_hat_f0, VectorXd::Zero(fault_dim), deriv_filter_init(y0), VectorXd::Zero(y0.size()), y0, std::nullopt};
}

namespace detail {
inline VectorXd predicted_output_rate(const ModelBank& bank, const VectorXd& mu, const VectorXd& x_hat_f,
                                      const VectorXd& u_f) {
  const auto& ref = bank.models.front();
  VectorXd out = VectorXd::Zero(ref.p());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    const auto& m = bank.models[i];
    out += w * (m.c * (m.a * x_hat_f + m.b * u_f + m.delta_x));
  }
  return out;
}
}  // namespace detail

// Advances the UIO by dt. `y` is the measurement at the end of the step and
// `u_f` the input applied over it.
//
// uio_derivative is implicit in f_hat, but only through L_bar f_hat, which is
// affine in y_dot. Its integral over the step therefore needs y_dot only
// through an interpolant whose integral is the exact increment y - y_prev,
// and RK4 integrates the quadratic one below exactly. The state estimate
// never sees the lagged y_dot, so a fault step does not kick it. The output injection K2 (y - C x_hat_f) is held from the start of the
// step, so an exact estimate of an exact model stays exact up to O(dt^4).
//
// The reported f_hat is the projector applied to (filtered y_dot - equally
// filtered model prediction): comparing a lagged y_dot with the raw
// prediction would close an unstable loop through u_f = u - S f_hat.
inline ObserverState uio_step(const Design& d, const ModelBank& bank, const ObserverState& st, const VectorXd& u_f,
                              const VectorXd& y, const VectorXd& mu, double dt, double tau_f = kDefaultDerivTau) {
  if (!(dt > 0.0)) throw std::invalid_argument("uio_step: dt must be positive");
  detail::check_observer_dims(d, bank, mu);
  const VectorXd& y_prev = st.y_prev;
  DerivFilterOutput filt = deriv_filter_step(st.deriv_filter, y, dt, tau_f);
  const VectorXd& y_dot = filt.y_dot;

  // y_dot(s) on [0, dt]. The held input makes y_dot jump by C B du at every
  // sample, so only the residual r = y - C B_bar int(u) is interpolated: a
  // quadratic through its last three samples (linear on the first step).
  VectorXd input_rate = VectorXd::Zero(y.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w != 0.0) input_rate += w * (bank.models[i].c * (bank.models[i].b * u_f));
  }
  const VectorXd residual_step = (y - y_prev) - dt * input_rate;
  VectorXd slope0 = residual_step / dt;
  VectorXd curve = VectorXd::Zero(y.size());
  if (st.residual_step) {
    slope0 = (residual_step + *st.residual_step) / (2.0 * dt) + input_rate;
    curve = (residual_step - *st.residual_step) / (dt * dt);
  } else {
    slope0 += input_rate;
  }

  VectorXd injection = VectorXd::Zero(st.x_hat_f.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w != 0.0) injection += w * d.uio.k2[i] * (y_prev - bank.models[i].c * st.x_hat_f);
  }
  auto rhs = [&](double s, const VectorXd& x) {
    const VectorXd stage_f = fault_estimate(d, bank, mu, slope0 + s * curve, x, u_f);
    VectorXd dx = injection;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const double w = mu(static_cast<Eigen::Index>(i));
      if (w != 0.0) dx += w * bank.models[i].derivative(x, u_f, stage_f);
    }
    return dx;
  };
  ObserverState next;
  next.x_hat_f = rk4_step(rhs, 0.0, st.x_hat_f, dt);
  next.y_prev = y;
  next.residual_step = residual_step;

  // Step average of the predicted rate. The prediction is affine in x_hat_f,
  // so it only needs the mean state, taken by the end-corrected trapezoid
  //   (x0 + x1) / 2 + dt / 12 (x0' - x1'),
  // which keeps it O(dt^4)-consistent with the secant slope the y filter sees.
  const VectorXd x_mean = 0.5 * (st.x_hat_f + next.x_hat_f) +
                          (dt / 12.0) * (rhs(0.0, st.x_hat_f) - rhs(dt, next.x_hat_f));
  const VectorXd rate_avg = detail::predicted_output_rate(bank, mu, x_mean, u_f);
  const double decay = std::exp(-dt / tau_f);
  next.predicted_y_dot = decay * st.predicted_y_dot + (1.0 - decay) * rate_avg;

  const auto& ref = bank.models.front();
  next.f_hat = VectorXd::Zero(ref.s());
  for (std::size_t i = 0; i < bank.size() && ref.s() > 0; ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w != 0.0) next.f_hat += w * d.uio.h_proj[i] * (y_dot - next.predicted_y_dot);
  }
  next.deriv_filter = std::move(filt.state);
  return next;
}

// Fault-free Luenberger observer on the nominal bank, driven by the nominal
// command u (not u_f). nominal_observer_derivative is its continuous form.
struct NominalObserverState {
  VectorXd x_hat;
  VectorXd y_prev;
};

inline VectorXd nominal_observer_derivative(const Design& d, const ModelBank& bank, const VectorXd& mu,
                                            const VectorXd& x_hat, const VectorXd& u, const VectorXd& y) {
  VectorXd dx = VectorXd::Zero(x_hat.size());
  const VectorXd no_fault = VectorXd::Zero(bank.models.front().s());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    const auto& m = bank.models[i];
    dx += w * (m.derivative(x_hat, u, no_fault) + d.k_nominal[i] * (y - m.c * x_hat));
  }
  return dx;
}

inline NominalObserverState nominal_observer_step(const Design& d, const ModelBank& bank,
                                                  const NominalObserverState& st, const VectorXd& u,
                                                  const VectorXd& y, const VectorXd& mu, double dt) {
  require_convex(mu, bank.size(), "nominal_observer_step");
  if (d.k_nominal.size() != bank.size()) {
    throw std::invalid_argument("nominal_observer_step: design and bank sizes differ");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("nominal_observer_step: dt must be positive");
  // Output injection held from the start of the step, as in uio_step.
  VectorXd injection = VectorXd::Zero(st.x_hat.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w != 0.0) injection += w * d.k_nominal[i] * (st.y_prev - bank.models[i].c * st.x_hat);
  }
  const VectorXd no_fault = VectorXd::Zero(bank.models.front().s());
  auto rhs = [&](const VectorXd& x) {
    VectorXd dx = injection;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const double w = mu(static_cast<Eigen::Index>(i));
      if (w != 0.0) dx += w * bank.models[i].derivative(x, u, no_fault);
    }
    return dx;
  };
  return {rk4_step(rhs, st.x_hat, dt), y};
}

}  // namespace trms

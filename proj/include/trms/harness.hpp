#pragma once

// Closed-loop fault-injection scenarios: plant (nonlinear or a frozen local
// model), fault-free and fault observers, nominal + FTC control, traces,
// metrics and CSV persistence.

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trms/errors.hpp"
#include "trms/ftc.hpp"
#include "trms/multimodel.hpp"
#include "trms/observer.hpp"
#include "trms/plant.hpp"
#include "trms/synthesis.hpp"

namespace trms {

enum class FaultKind { none, step, intermittent, ramp };

inline FaultKind parse_fault_kind(const std::string& s) {
  if (s == "none") return FaultKind::none;
  if (s == "step") return FaultKind::step;
  if (s == "intermittent") return FaultKind::intermittent;
  if (s == "ramp") return FaultKind::ramp;
  throw ConfigError("fault kind must be none|step|intermittent|ramp, got '" + s + "'");
}

inline std::string to_string(FaultKind k) {
  switch (k) {
    case FaultKind::none: return "none";
    case FaultKind::step: return "step";
    case FaultKind::intermittent: return "intermittent";
    case FaultKind::ramp: return "ramp";
  }
  return "none";
}

// Additive fault. Amplitude is in the units of the fault channel (V for the
// default actuator convention L = B).
struct FaultProfile {
  FaultKind kind = FaultKind::none;
  std::vector<int> channels{0};  // 0-based fault channels receiving the signal
  double amplitude = 0.0;
  double t_start = 0.0;
  double t_stop = 0.0;
  double period = 1.0;  // intermittent only
  double duty = 0.5;    // intermittent only, fraction of the period the fault is on

  void validate(double t_end, Eigen::Index fault_dim) const {
    if (kind == FaultKind::none) return;
    if (!std::isfinite(amplitude)) throw ConfigError("fault: amplitude must be finite");
    if (!(t_start < t_stop) || !(t_stop <= t_end)) throw ConfigError("fault: need t_start < t_stop <= t_end");
    for (int c : channels) {
      if (c < 0 || c >= fault_dim) throw ConfigError("fault: channel " + std::to_string(c) + " out of range");
    }
    if (kind == FaultKind::intermittent && (!(period > 0.0) || !(duty > 0.0) || !(duty <= 1.0))) {
      throw ConfigError("fault: intermittent profile needs period > 0 and duty in (0, 1]");
    }
  }
};

// Active on [t_start, t_stop).
inline VectorXd fault_signal(const FaultProfile& profile, double t, Eigen::Index fault_dim) {
  VectorXd f = VectorXd::Zero(fault_dim);
  if (profile.kind == FaultKind::none || t < profile.t_start || t >= profile.t_stop) return f;
  double value = 0.0;
  switch (profile.kind) {
    case FaultKind::step:
      value = profile.amplitude;
      break;
    case FaultKind::intermittent: {
      const double phase = std::fmod(t - profile.t_start, profile.period);
      value = phase < profile.duty * profile.period ? profile.amplitude : 0.0;
      break;
    }
    case FaultKind::ramp:
      value = profile.amplitude * (t - profile.t_start) / (profile.t_stop - profile.t_start);
      break;
    case FaultKind::none:
      break;
  }
  for (int c : profile.channels) {
    if (c >= 0 && c < fault_dim) f(c) = value;
  }
  return f;
}

struct BankConfig {
  std::vector<double> nodes{-0.4, 0.0, 0.4};
  double sigma = 0.25;
  ModelSpec spec;
  std::optional<ModelBank> preloaded;  // use as-is instead of re-linearizing
};

struct ControllerConfig {
  ControllerType type = ControllerType::hinf;
  std::optional<double> zeta;  // override the preset
  std::optional<double> rho;
  bool ftc = true;            // false: apply the nominal command only
  double compensation = 1.0;  // scale of the -S f_hat term
  double u_limit = 2.5;

  SynthesisWeights weights() const {
    SynthesisWeights w = preset_weights(type);
    if (zeta) w.zeta = *zeta;
    if (rho) w.rho = *rho;
    return w;
  }
};

struct SimConfig {
  double dt = 1e-3;
  double t_end = 50.0;
  std::optional<PlantState> initial_state;     // default: trim at the t = 0 reference
  std::optional<PlantState> initial_estimate;  // default: the initial state
  Reference reference;
  std::optional<int> frozen_model;  // simulate bank model i instead of the nonlinear plant
  double noise_sigma = 0.0;         // Gaussian output noise, off by default
  std::uint64_t seed = 0;
  double tau_f = kDefaultDerivTau;
};

struct ScenarioConfig {
  TrmsParams params;
  BankConfig bank;
  ControllerConfig controller;
  FaultProfile fault;
  SimConfig sim;
};

struct TraceSample {
  double t = 0.0;
  PlantState x = PlantState::Zero();
  VectorXd x_hat;
  VectorXd x_hat_f;
  Eigen::Vector2d ref = Eigen::Vector2d::Zero();
  VectorXd u;
  VectorXd f;
  VectorXd f_hat;
};

struct SimTrace {
  Eigen::Index fault_dim = 0;
  std::vector<TraceSample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
};

// Offline products a scenario runs on; exposed for tests and the CLI.
struct PreparedScenario {
  ModelBank bank;
  Design design;
};

inline PreparedScenario prepare_scenario(const ScenarioConfig& cfg) {
  cfg.params.validate();
  const SynthesisWeights w = cfg.controller.weights();
  if (!(w.zeta >= 0.0) || !(w.rho > 0.0) || !std::isfinite(w.zeta) || !std::isfinite(w.rho)) {
    throw ConfigError("controller: need finite zeta >= 0 and rho > 0");
  }
  if (!(cfg.controller.u_limit > 0.0)) throw ConfigError("controller: u_limit must be positive");
  ModelBank bank = cfg.bank.preloaded ? *cfg.bank.preloaded
                                      : build_bank(cfg.params, cfg.bank.nodes, cfg.bank.sigma, cfg.bank.spec,
                                                   cfg.controller.u_limit);
  bank.validate();
  Design d = design(bank, w.zeta, w.rho);
  return {std::move(bank), std::move(d)};
}

inline SimTrace run_scenario(const ScenarioConfig& cfg, const PreparedScenario& prep) {
  const SimConfig& sim = cfg.sim;
  if (!(sim.dt > 0.0) || !std::isfinite(sim.dt)) throw ConfigError("sim: dt must be positive");
  if (!(sim.t_end >= 0.0)) throw ConfigError("sim: t_end must be non-negative");
  sim.reference.alpha_v.validate("reference alpha_v");
  sim.reference.alpha_h.validate("reference alpha_h");

  const ModelBank& bank = prep.bank;
  const Design& des = prep.design;
  const LocalModel& ref_model = bank.models.front();
  const Eigen::Index s_dim = ref_model.s();
  const MatrixXd& c_mat = ref_model.c;
  cfg.fault.validate(sim.t_end, s_dim);
  if (sim.frozen_model && (*sim.frozen_model < 0 || static_cast<std::size_t>(*sim.frozen_model) >= bank.size())) {
    throw ConfigError("sim: frozen_model index out of range");
  }
  const bool actuator_faults = bank.actuator_faults;
  // Fault matrix for torque-channel injection into the nonlinear plant.
  const MatrixXd l_plant = ref_model.l;

  const double limit = cfg.controller.u_limit;
  TrimCache trims(cfg.params, limit);

  const auto initial_ref = sim.reference.at(0.0);
  VectorXd x = sim.initial_state ? VectorXd(*sim.initial_state)
                                 : VectorXd(trims.get(initial_ref.first, initial_ref.second).state);
  if (sim.frozen_model && !sim.initial_state) x = bank.models[static_cast<std::size_t>(*sim.frozen_model)].op_state;
  const VectorXd x_est0 = sim.initial_estimate ? VectorXd(*sim.initial_estimate) : x;

  std::mt19937_64 rng(sim.seed);
  std::normal_distribution<double> noise(0.0, sim.noise_sigma > 0.0 ? sim.noise_sigma : 1.0);
  auto measure = [&](const VectorXd& state) {
    VectorXd y = c_mat * state;
    if (sim.noise_sigma > 0.0) {
      for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise(rng);
    }
    return y;
  };

  VectorXd y = measure(x);
  ObserverState uio = observer_init(x_est0, y, s_dim);
  NominalObserverState nominal{x_est0, y};

  auto schedule = [&](const VectorXd& x_hat) -> VectorXd {
    if (sim.frozen_model) {
      VectorXd mu = VectorXd::Zero(static_cast<Eigen::Index>(bank.size()));
      mu(*sim.frozen_model) = 1.0;
      return mu;
    }
    return weights(bank, x_hat(idx::kPitch));
  };

  const long long steps = std::llround(sim.t_end / sim.dt);
  SimTrace trace;
  trace.fault_dim = s_dim;
  trace.samples.reserve(static_cast<std::size_t>(steps + 1));

  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sim.dt;
    const auto [ref_v, ref_h] = sim.reference.at(t);
    const Trim& target = trims.get(ref_v, ref_h);
    const VectorXd mu = schedule(nominal.x_hat);
    const VectorXd u_nom = nominal_control(des.ftc, bank, mu, nominal.x_hat, target, limit);
    const VectorXd u_f = cfg.controller.ftc ? ftc_augment(des.ftc, mu, u_nom, uio.f_hat, nominal.x_hat,
                                                          uio.x_hat_f, limit, cfg.controller.compensation)
                                            : u_nom;
    const VectorXd f = fault_signal(cfg.fault, t, s_dim);

    TraceSample sample;
    sample.t = t;
    sample.x = x;
    sample.x_hat = nominal.x_hat;
    sample.x_hat_f = uio.x_hat_f;
    sample.ref = Eigen::Vector2d(ref_v, ref_h);
    sample.u = u_f;
    sample.f = f;
    sample.f_hat = uio.f_hat;
    trace.samples.push_back(std::move(sample));
    if (k == steps) break;

    if (sim.frozen_model) {
      const LocalModel& m = bank.models[static_cast<std::size_t>(*sim.frozen_model)];
      x = rk4_step([&](const VectorXd& s) { return m.derivative(s, u_f, f); }, x, sim.dt);
    } else if (actuator_faults) {
      const ControlInput applied = u_f + f;
      x = step(PlantState(x), applied, sim.dt, cfg.params);
    } else {
      const ControlInput applied = u_f;
      const VectorXd injected = s_dim > 0 ? VectorXd(l_plant * f) : VectorXd::Zero(kStateDim);
      x = rk4_step(
          [&](const VectorXd& s) { return VectorXd(dynamics(PlantState(s), applied, cfg.params) + injected); }, x,
          sim.dt);
    }
    if (!x.allFinite()) throw Error("run_scenario: plant state diverged at t = " + std::to_string(t));

    y = measure(x);
    uio = uio_step(des, bank, uio, u_f, y, mu, sim.dt, sim.tau_f);
    nominal = nominal_observer_step(des, bank, nominal, u_nom, y, mu, sim.dt);
  }
  return trace;
}

inline SimTrace run_scenario(const ScenarioConfig& cfg) { return run_scenario(cfg, prepare_scenario(cfg)); }

struct Metrics {
  std::array<std::optional<double>, 2> rms_pre;   // alpha_v, alpha_h tracking, t < t_start
  std::array<std::optional<double>, 2> rms_post;  // t >= t_start
  std::optional<double> fault_rms;                // RMS of ||f - f_hat|| over the trace
  std::array<std::optional<double>, 2> settling_time;
  double saturation_duty = 0.0;
};

// `settle_band` (rad) defines settling: the time after which the tracking
// error stays inside the band for the rest of the trace.
inline Metrics metrics(const SimTrace& trace, const FaultProfile& profile, double u_limit = 2.5,
                       double settle_band = 0.02) {
  if (trace.empty()) throw std::invalid_argument("metrics: empty trace");
  const double split =
      profile.kind == FaultKind::none ? std::numeric_limits<double>::infinity() : profile.t_start;
  std::array<double, 2> sum_pre{0.0, 0.0};
  std::array<double, 2> sum_post{0.0, 0.0};
  std::size_t n_pre = 0;
  std::size_t n_post = 0;
  double fault_sq = 0.0;
  std::size_t saturated = 0;
  std::array<std::optional<double>, 2> last_violation;

  for (const TraceSample& s : trace.samples) {
    const std::array<double, 2> err{s.x(idx::kPitch) - s.ref(0), s.x(idx::kYaw) - s.ref(1)};
    for (int a = 0; a < 2; ++a) {
      if (s.t < split) {
        sum_pre[a] += err[a] * err[a];
      } else {
        sum_post[a] += err[a] * err[a];
      }
      if (std::abs(err[a]) > settle_band) last_violation[a] = s.t;
    }
    (s.t < split ? n_pre : n_post)++;
    if (trace.fault_dim > 0) fault_sq += (s.f - s.f_hat).squaredNorm();
    if (s.u.size() > 0 && s.u.cwiseAbs().maxCoeff() >= u_limit * (1.0 - 1e-12)) ++saturated;
  }

  Metrics m;
  const double n_total = static_cast<double>(trace.size());
  for (int a = 0; a < 2; ++a) {
    if (n_pre > 0) m.rms_pre[a] = std::sqrt(sum_pre[a] / static_cast<double>(n_pre));
    if (n_post > 0) m.rms_post[a] = std::sqrt(sum_post[a] / static_cast<double>(n_post));
    if (!last_violation[a]) {
      m.settling_time[a] = trace.samples.front().t;
    } else if (*last_violation[a] < trace.samples.back().t) {
      // Settled at the first sample after the last excursion.
      for (const TraceSample& s : trace.samples) {
        if (s.t > *last_violation[a]) {
          m.settling_time[a] = s.t;
          break;
        }
      }
    }
  }
  if (trace.fault_dim > 0) m.fault_rms = std::sqrt(fault_sq / n_total);
  m.saturation_duty = static_cast<double>(saturated) / n_total;
  return m;
}

// ---------------------------------------------------------------------------
// CSV traces
// ---------------------------------------------------------------------------

inline std::vector<std::string> csv_header(Eigen::Index fault_dim) {
  std::vector<std::string> cols{"t"};
  for (int i = 1; i <= 6; ++i) cols.push_back("x" + std::to_string(i));
  for (int i = 1; i <= 6; ++i) cols.push_back("xh" + std::to_string(i));
  for (int i = 1; i <= 6; ++i) cols.push_back("xf" + std::to_string(i));
  cols.insert(cols.end(), {"ref_av", "ref_ah", "u_v", "u_h"});
  for (Eigen::Index i = 1; i <= fault_dim; ++i) cols.push_back("f" + std::to_string(i));
  for (Eigen::Index i = 1; i <= fault_dim; ++i) cols.push_back("fhat" + std::to_string(i));
  return cols;
}

namespace detail {
inline void put_number(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  os << buf;
}
}  // namespace detail

inline void write_csv(std::ostream& os, const SimTrace& trace) {
  const auto header = csv_header(trace.fault_dim);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const TraceSample& s : trace.samples) {
    detail::put_number(os, s.t);
    auto put_vec = [&](const auto& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        os << ',';
        detail::put_number(os, v(i));
      }
    };
    put_vec(s.x);
    put_vec(s.x_hat);
    put_vec(s.x_hat_f);
    put_vec(s.ref);
    put_vec(s.u);
    put_vec(s.f);
    put_vec(s.f_hat);
    os << '\n';
  }
}

inline SimTrace read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("trace CSV: missing header");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
  }
  constexpr std::size_t kFixed = 1 + 18 + 4;
  if (cols.size() < kFixed || (cols.size() - kFixed) % 2 != 0) {
    throw ConfigError("trace CSV: unexpected column count " + std::to_string(cols.size()));
  }
  const auto fault_dim = static_cast<Eigen::Index>((cols.size() - kFixed) / 2);
  const auto expected = csv_header(fault_dim);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] != expected[i]) {
      throw ConfigError("trace CSV: column " + std::to_string(i) + " is '" + cols[i] + "', expected '" +
                        expected[i] + "'");
    }
  }

  SimTrace trace;
  trace.fault_dim = fault_dim;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> v;
    v.reserve(cols.size());
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("trace CSV: bad number '" + cell + "' on line " + std::to_string(row));
      }
    }
    if (v.size() != cols.size()) throw ConfigError("trace CSV: wrong field count on line " + std::to_string(row));
    TraceSample s;
    std::size_t at = 0;
    auto take = [&](Eigen::Index n) {
      VectorXd out(n);
      for (Eigen::Index i = 0; i < n; ++i) out(i) = v[at++];
      return out;
    };
    s.t = v[at++];
    s.x = take(6);
    s.x_hat = take(6);
    s.x_hat_f = take(6);
    s.ref = take(2);
    s.u = take(2);
    s.f = take(fault_dim);
    s.f_hat = take(fault_dim);
    trace.samples.push_back(std::move(s));
  }
  return trace;
}

}  // namespace trms

#pragma once

// Nominal tracking law and its fault-tolerant augmentation
//   u_f = u + sum_i mu_i (-S_i f_hat + K1_i (x_hat - x_hat_f)).

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trms/multimodel.hpp"
#include "trms/plant.hpp"
#include "trms/synthesis.hpp"

namespace trms {

enum class ControllerType { state_feedback, hinf };

struct SynthesisWeights {
  double zeta;
  double rho;
};

// Both nominal variants share the Riccati law and differ only in weights.
inline SynthesisWeights preset_weights(ControllerType type) {
  switch (type) {
    case ControllerType::hinf:
      return {2.0, 700.0};
    case ControllerType::state_feedback:
      return {1.0, 100.0};
  }
  throw std::invalid_argument("unknown controller type");
}

inline ControllerType parse_controller_type(const std::string& name) {
  if (name == "state_feedback") return ControllerType::state_feedback;
  if (name == "hinf") return ControllerType::hinf;
  throw std::invalid_argument("controller type must be 'state_feedback' or 'hinf', got '" + name + "'");
}

inline std::string to_string(ControllerType type) {
  return type == ControllerType::hinf ? "hinf" : "state_feedback";
}

// Piecewise-constant signal: value of the latest breakpoint at or before t
// (the first value before the first breakpoint).
struct Breakpoints {
  std::vector<std::pair<double, double>> points;  // (time, value), time increasing

  double at(double t) const {
    if (points.empty()) return 0.0;
    double v = points.front().second;
    for (const auto& [time, value] : points) {
      if (time <= t) {
        v = value;
      } else {
        break;
      }
    }
    return v;
  }

  void validate(const char* name) const {
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (!(points[i].first > points[i - 1].first)) {
        throw std::invalid_argument(std::string(name) + ": breakpoint times must increase");
      }
    }
  }
};

// Square wave alternating low/high every half period, starting low at t0.
inline Breakpoints square_wave(double low, double high, double period, double t0, double t_end) {
  if (!(period > 0.0)) throw std::invalid_argument("square_wave: period must be positive");
  Breakpoints b;
  for (int k = 0; t0 + 0.5 * period * k <= t_end; ++k) {
    b.points.emplace_back(t0 + 0.5 * period * k, k % 2 == 0 ? low : high);
  }
  return b;
}

struct Reference {
  Breakpoints alpha_v;
  Breakpoints alpha_h;

  std::pair<double, double> at(double t) const { return {alpha_v.at(t), alpha_h.at(t)}; }
};

// Memoizes trims of the (few) distinct reference levels.
class TrimCache {
 public:
  TrimCache(TrmsParams params, double u_limit) : params_(std::move(params)), u_limit_(u_limit) {}

  const Trim& get(double alpha_v, double alpha_h) {
    const auto key = std::make_pair(alpha_v, alpha_h);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_.emplace(key, trim(alpha_v, alpha_h, params_, u_limit_)).first;
    }
    return it->second;
  }

 private:
  TrmsParams params_;
  double u_limit_;
  std::map<std::pair<double, double>, Trim> cache_;
};

// Blended gain sum_i mu_i K1_i.
inline MatrixXd blended_gain(const std::vector<MatrixXd>& gains, const VectorXd& mu) {
  MatrixXd k = MatrixXd::Zero(gains.front().rows(), gains.front().cols());
  for (std::size_t i = 0; i < gains.size(); ++i) k += mu(static_cast<Eigen::Index>(i)) * gains[i];
  return k;
}

inline VectorXd saturate(const VectorXd& u, double limit) { return u.cwiseMax(-limit).cwiseMin(limit); }

// u = u* - sum mu_i K1_i (x_hat - x*), saturated to +-limit.
inline VectorXd nominal_control(const FtcGains& gains, const ModelBank& bank, const VectorXd& mu,
                                const VectorXd& x_hat, const Trim& target,
                                double limit = std::numeric_limits<double>::infinity()) {
  require_convex(mu, bank.size(), "nominal_control");
  if (gains.k1.size() != bank.size()) throw std::invalid_argument("nominal_control: gain/bank size mismatch");
  const VectorXd x_star = target.state;
  const VectorXd u_star = target.input;
  return saturate(VectorXd(u_star - blended_gain(gains.k1, mu) * (x_hat - x_star)), limit);
}

// Same, trimming the plant at the reference angles first.
inline VectorXd nominal_control(const FtcGains& gains, const ModelBank& bank, const VectorXd& mu,
                                const VectorXd& x_hat, double alpha_v_ref, double alpha_h_ref,
                                const TrmsParams& params, double limit = 2.5) {
  return nominal_control(gains, bank, mu, x_hat, trim(alpha_v_ref, alpha_h_ref, params, limit), limit);
}

// Fault-tolerant command. `compensation` scales the -S f_hat term (1 = full,
// 0 = disabled).
inline VectorXd ftc_augment(const FtcGains& gains, const VectorXd& mu, const VectorXd& u_nom, const VectorXd& f_hat,
                            const VectorXd& x_hat, const VectorXd& x_hat_f,
                            double limit = std::numeric_limits<double>::infinity(), double compensation = 1.0) {
  if (gains.k1.size() != gains.s_comp.size() || static_cast<std::size_t>(mu.size()) != gains.k1.size()) {
    throw std::invalid_argument("ftc_augment: gain/weight size mismatch");
  }
  VectorXd u = u_nom;
  for (std::size_t i = 0; i < gains.k1.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    VectorXd term = gains.k1[i] * (x_hat - x_hat_f);
    if (f_hat.size() > 0) term -= compensation * (gains.s_comp[i] * f_hat);
    u += w * term;
  }
  return saturate(u, limit);
}

}  // namespace trms

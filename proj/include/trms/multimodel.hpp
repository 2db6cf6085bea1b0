#pragma once

// Bank of affine local models x' = A_i x + B_i u + L_i f + dX_i, y = C x,
// obtained by linearizing the plant at trim points, and the normalized
// Gaussian scheduling weights that blend them.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trms/errors.hpp"
#include "trms/linalg.hpp"
#include "trms/plant.hpp"

namespace trms {

struct ModelSpec {
  // State indices measured by C (0-based). Default: alpha_v, u_vv, alpha_h, u_hh.
  std::vector<int> measured{idx::kPitch, idx::kMainMotor, idx::kYaw, idx::kTailMotor};
  // Fault distribution L. Unset means additive actuator faults, L = B.
  std::optional<MatrixXd> fault_matrix;
  // Central-difference step, relative: h_j = fd_rel_step * max(1, |x_j|).
  double fd_rel_step = 1e-6;
};

inline MatrixXd selection_matrix(const std::vector<int>& measured, int n) {
  MatrixXd c = MatrixXd::Zero(static_cast<Eigen::Index>(measured.size()), n);
  for (std::size_t r = 0; r < measured.size(); ++r) {
    if (measured[r] < 0 || measured[r] >= n) {
      throw ModelError("output selection index " + std::to_string(measured[r]) + " out of range");
    }
    c(static_cast<Eigen::Index>(r), measured[r]) = 1.0;
  }
  return c;
}

struct LocalModel {
  MatrixXd a;        // n x n
  MatrixXd b;        // n x m
  MatrixXd c;        // p x n
  MatrixXd l;        // n x s
  VectorXd delta_x;  // n
  PlantState op_state = PlantState::Zero();
  ControlInput op_input = ControlInput::Zero();

  Eigen::Index n() const { return a.rows(); }
  Eigen::Index m() const { return b.cols(); }
  Eigen::Index p() const { return c.rows(); }
  Eigen::Index s() const { return l.cols(); }

  VectorXd derivative(const VectorXd& x, const VectorXd& u, const VectorXd& f) const {
    VectorXd dx = a * x + b * u + delta_x;
    if (s() > 0) dx += l * f;
    return dx;
  }
};

// Assembles a model and checks the structural assumptions the synthesis
// relies on: full column rank of C L, (A, C) detectable, (A, B) stabilizable.
inline LocalModel make_local_model(MatrixXd a, MatrixXd b, MatrixXd c, MatrixXd l, VectorXd delta_x,
                                   const PlantState& op_state = PlantState::Zero(),
                                   const ControlInput& op_input = ControlInput::Zero()) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n || l.rows() != n || delta_x.size() != n) {
    throw ModelError("local model: inconsistent matrix dimensions");
  }
  if (c.rows() < l.cols()) {
    throw ModelError("local model: need at least as many outputs as fault channels (p >= s)");
  }
  if (l.cols() > 0) {
    const int r = numerical_rank(c * l);
    if (r < l.cols()) {
      throw ModelError("local model: rank(C L) = " + std::to_string(r) + " < s = " + std::to_string(l.cols()) +
                       "; the fault projector needs C L to have full column rank");
    }
  }
  if (!is_detectable(a, c)) {
    throw ModelError("local model: (A, C) is not detectable");
  }
  if (!is_stabilizable(a, b)) {
    throw ModelError("local model: (A, B) is not stabilizable");
  }
  LocalModel model;
  model.a = std::move(a);
  model.b = std::move(b);
  model.c = std::move(c);
  model.l = std::move(l);
  model.delta_x = std::move(delta_x);
  model.op_state = op_state;
  model.op_input = op_input;
  return model;
}

// Jacobians of the plant at (op_state, op_input) by central differences,
// with the affine offset dX = f(x, u) - A x - B u.
inline LocalModel linearize(const TrmsParams& params, const PlantState& op_state, const ControlInput& op_input,
                            const ModelSpec& spec = {}) {
  if (!op_state.allFinite() || !op_input.allFinite()) {
    throw std::invalid_argument("linearize: non-finite operating point");
  }
  MatrixXd a(kStateDim, kStateDim);
  MatrixXd b(kStateDim, kInputDim);
  for (int j = 0; j < kStateDim; ++j) {
    const double h = spec.fd_rel_step * std::max(1.0, std::abs(op_state[j]));
    PlantState xp = op_state;
    PlantState xm = op_state;
    xp[j] += h;
    xm[j] -= h;
    a.col(j) = (dynamics(xp, op_input, params) - dynamics(xm, op_input, params)) / (xp[j] - xm[j]);
  }
  for (int j = 0; j < kInputDim; ++j) {
    const double h = spec.fd_rel_step * std::max(1.0, std::abs(op_input[j]));
    ControlInput up = op_input;
    ControlInput um = op_input;
    up[j] += h;
    um[j] -= h;
    b.col(j) = (dynamics(op_state, up, params) - dynamics(op_state, um, params)) / (up[j] - um[j]);
  }
  VectorXd delta_x = dynamics(op_state, op_input, params) - a * op_state - b * op_input;
  MatrixXd c = selection_matrix(spec.measured, kStateDim);
  MatrixXd l = spec.fault_matrix ? *spec.fault_matrix : b;
  return make_local_model(std::move(a), std::move(b), std::move(c), std::move(l), std::move(delta_x), op_state,
                          op_input);
}

struct ModelBank {
  std::vector<LocalModel> models;
  std::vector<double> nodes;  // scheduling values (pitch angles), strictly increasing
  double sigma = 0.25;        // Gaussian membership spread
  bool actuator_faults = true;  // L_i = B_i: faults add to the plant input

  void validate() const {
    if (models.empty()) throw ModelError("model bank: at least one model required");
    if (nodes.size() != models.size()) throw ModelError("model bank: one scheduling node per model required");
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (!(nodes[i] > nodes[i - 1])) throw ModelError("model bank: nodes must be strictly increasing");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ModelError("model bank: sigma must be positive");
    const auto& ref = models.front();
    for (const auto& m : models) {
      if (m.n() != ref.n() || m.m() != ref.m() || m.p() != ref.p() || m.s() != ref.s()) {
        throw ModelError("model bank: models must share dimensions");
      }
      if (m.c != ref.c) {
        throw ModelError("model bank: all models must share the output matrix C");
      }
    }
  }

  std::size_t size() const { return models.size(); }
};

// Trims at each node (yaw 0) and linearizes there.
inline ModelBank build_bank(const TrmsParams& params, const std::vector<double>& nodes, double sigma,
                            const ModelSpec& spec = {}, double u_limit = 2.5) {
  ModelBank bank;
  bank.nodes = nodes;
  bank.sigma = sigma;
  bank.actuator_faults = !spec.fault_matrix.has_value();
  for (double node : nodes) {
    const Trim op = trim(node, 0.0, params, u_limit);
    bank.models.push_back(linearize(params, op.state, op.input, spec));
  }
  bank.validate();
  return bank;
}

// Normalized Gaussian memberships over the scheduling nodes.
inline VectorXd weights(const ModelBank& bank, double xi) {
  const auto n = static_cast<Eigen::Index>(bank.nodes.size());
  if (n == 0) throw ModelError("weights: empty bank");
  VectorXd expo(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (xi - bank.nodes[static_cast<std::size_t>(i)]) / bank.sigma;
    expo(i) = -0.5 * d * d;
  }
  // Shift by the max exponent so far-away xi does not underflow to 0/0.
  VectorXd mu = (expo.array() - expo.maxCoeff()).exp().matrix();
  return mu / mu.sum();
}

inline void require_convex(const VectorXd& mu, std::size_t n, const char* who) {
  if (static_cast<std::size_t>(mu.size()) != n) {
    throw std::invalid_argument(std::string(who) + ": weight vector length does not match the bank");
  }
  if (!mu.allFinite() || mu.minCoeff() < -1e-9 || std::abs(mu.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(who) + ": weights must be non-negative and sum to 1");
  }
}

struct BlendedModel {
  MatrixXd a;
  MatrixXd b;
  VectorXd delta_x;
};

inline BlendedModel blend(const ModelBank& bank, const VectorXd& mu) {
  require_convex(mu, bank.size(), "blend");
  const auto& first = bank.models.front();
  BlendedModel out{MatrixXd::Zero(first.n(), first.n()), MatrixXd::Zero(first.n(), first.m()),
                   VectorXd::Zero(first.n())};
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double w = mu(static_cast<Eigen::Index>(i));
    out.a += w * bank.models[i].a;
    out.b += w * bank.models[i].b;
    out.delta_x += w * bank.models[i].delta_x;
  }
  return out;
}

}  // namespace trms

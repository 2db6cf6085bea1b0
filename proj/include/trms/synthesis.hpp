#pragma once

// Offline gain synthesis for the multi-model FTC scheme:
//   H_i  = [(C L_i)^T C L_i]^-1 (C L_i)^T          fault projector
//   K1_i = R^-1 B_i^T P,  Q = C^T C + zeta I, R = I / rho
//   A_bar_i = (I - L_i H_i C) A_i,  K2_i by duality on (A_bar_i^T, C^T)
//   S_i  = argmin || B_i S - L_i ||_F              fault compensation

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trms/errors.hpp"
#include "trms/linalg.hpp"
#include "trms/multimodel.hpp"

namespace trms {

// Left pseudo-inverse of C L through the normal equations.
inline MatrixXd fault_projector(const MatrixXd& c_mat, const MatrixXd& l_mat) {
  if (c_mat.cols() != l_mat.rows()) {
    throw std::invalid_argument("fault_projector: C and L dimensions do not chain");
  }
  const MatrixXd cl = c_mat * l_mat;
  if (cl.cols() == 0) return MatrixXd(0, c_mat.rows());
  if (numerical_rank(cl) < cl.cols()) {
    throw SynthesisError("fault_projector: C L is rank deficient; the fault distribution must be of full column rank "
                         "as seen through the outputs");
  }
  const MatrixXd gram = cl.transpose() * cl;
  return gram.ldlt().solve(cl.transpose());
}

inline double care_residual(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r,
                            const MatrixXd& p) {
  const MatrixXd g = b * r.llt().solve(b.transpose());
  return (a.transpose() * p + p * a - p * g * p + q).norm();
}

namespace detail {

// Matrix sign function by scaled Newton iteration.
inline MatrixXd matrix_sign(MatrixXd z) {
  const Eigen::Index dim = z.rows();
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<MatrixXd> lu(z);
    const VectorXd u_diag = lu.matrixLU().diagonal();
    double log_det = 0.0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double d = std::abs(u_diag(k));
      if (d == 0.0) throw SynthesisError("solve_care: singular iterate in sign iteration");
      log_det += std::log(d);
    }
    const double c = it < 20 ? std::exp(-log_det / static_cast<double>(dim)) : 1.0;
    const MatrixXd next = 0.5 * (c * z + lu.inverse() / c);
    const double change = (next - z).lpNorm<1>();
    z = next;
    if (change <= 1e-13 * z.lpNorm<1>()) break;
  }
  return z;
}

}  // namespace detail

// Stabilizing solution of A^T P + P A - P B R^-1 B^T P + Q = 0, from the
// stable invariant subspace of the Hamiltonian, then refined with Newton
// (Kleinman) steps while the residual keeps dropping.
inline MatrixXd solve_care(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != b.cols() ||
      r.cols() != b.cols()) {
    throw std::invalid_argument("solve_care: inconsistent dimensions");
  }
  if ((q - q.transpose()).norm() > 1e-12 * std::max(1.0, q.norm())) {
    throw std::invalid_argument("solve_care: Q must be symmetric");
  }
  if (n > 0 && Eigen::SelfAdjointEigenSolver<MatrixXd>(q).eigenvalues().minCoeff() < -1e-10 * std::max(1.0, q.norm())) {
    throw std::invalid_argument("solve_care: Q must be positive semidefinite");
  }
  Eigen::LLT<MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success || (r - r.transpose()).norm() > 1e-12 * std::max(1.0, r.norm())) {
    throw std::invalid_argument("solve_care: R must be symmetric positive definite");
  }
  if (n == 0) return MatrixXd(0, 0);

  const MatrixXd g = b * r_llt.solve(b.transpose());
  MatrixXd ham(2 * n, 2 * n);
  ham << a, -g, -q, -a.transpose();

  const Eigen::VectorXcd ham_eigs = eigenvalues(ham);
  const double axis_tol = 1e-9 * std::max(1.0, ham.norm());
  for (Eigen::Index k = 0; k < ham_eigs.size(); ++k) {
    if (std::abs(ham_eigs(k).real()) <= axis_tol) {
      throw SynthesisError("solve_care: Hamiltonian has eigenvalues on the imaginary axis "
                           "(pair not stabilizable/detectable through the weights)");
    }
  }

  const MatrixXd w = detail::matrix_sign(ham);
  const MatrixXd eye = MatrixXd::Identity(n, n);
  MatrixXd lhs(2 * n, n);
  MatrixXd rhs(2 * n, n);
  lhs << w.topRightCorner(n, n), w.bottomRightCorner(n, n) + eye;
  rhs << -(w.topLeftCorner(n, n) + eye), -w.bottomLeftCorner(n, n);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(lhs);
  qr.setThreshold(1e-12);
  if (qr.rank() < n) {
    throw SynthesisError("solve_care: stable subspace is not a graph; (A, B) is not stabilizable");
  }
  MatrixXd p = qr.solve(rhs);
  p = 0.5 * (p + p.transpose());

  double res = care_residual(a, b, q, r, p);
  for (int it = 0; it < 4 && res > 0.0; ++it) {
    const MatrixXd k = r_llt.solve(b.transpose() * p);
    const MatrixXd closed = a - b * k;
    if (!is_hurwitz(closed)) break;
    MatrixXd candidate;
    try {
      candidate = solve_lyapunov(closed, q + k.transpose() * r * k);
    } catch (const SynthesisError&) {
      break;
    }
    const double cand_res = care_residual(a, b, q, r, candidate);
    if (!(cand_res < res)) break;
    p = candidate;
    res = cand_res;
  }

  if (!p.allFinite() || !is_hurwitz(a - g * p)) {
    throw SynthesisError("solve_care: no stabilizing solution; (A, B) is not stabilizable");
  }
  return p;
}

// State-feedback gain K1 (m x n) for u = -K1 x.
inline MatrixXd feedback_gain(const LocalModel& model, double zeta, double rho) {
  if (!(zeta >= 0.0) || !(rho > 0.0) || !std::isfinite(zeta) || !std::isfinite(rho)) {
    throw std::invalid_argument("feedback_gain: need zeta >= 0 and rho > 0");
  }
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  const MatrixXd q = model.c.transpose() * model.c + zeta * MatrixXd::Identity(n, n);
  const MatrixXd r = MatrixXd::Identity(m, m) / rho;
  const MatrixXd p = solve_care(model.a, model.b, q, r);
  return rho * model.b.transpose() * p;
}

struct ObserverGain {
  MatrixXd a_bar;  // (I - L H C) A
  MatrixXd k2;     // n x p
};

// Decoupled observer gain. With no fault channel (H of zero rows) this is a
// plain Luenberger design on (A, C).
inline ObserverGain observer_gain(const LocalModel& model, const MatrixXd& h_proj) {
  const Eigen::Index n = model.n();
  const Eigen::Index p = model.p();
  MatrixXd a_bar = model.a;
  if (model.s() > 0 && h_proj.rows() > 0) {
    if (h_proj.rows() != model.s() || h_proj.cols() != p) {
      throw std::invalid_argument("observer_gain: projector has the wrong shape");
    }
    a_bar = (MatrixXd::Identity(n, n) - model.l * h_proj * model.c) * model.a;
  }
  if (!is_detectable(a_bar, model.c)) {
    throw SynthesisError("observer_gain: (A_bar, C) is not detectable; the local pair (A_i, C) must be observable "
                         "after fault decoupling");
  }
  const MatrixXd pm =
      solve_care(a_bar.transpose(), model.c.transpose(), MatrixXd::Identity(n, n), MatrixXd::Identity(p, p));
  return {a_bar, pm * model.c.transpose()};
}

struct CompensationGain {
  MatrixXd s;       // m x s
  double residual;  // || B S - L ||_F
};

inline CompensationGain comp_gain(const MatrixXd& b_mat, const MatrixXd& l_mat) {
  if (b_mat.rows() != l_mat.rows()) {
    throw std::invalid_argument("comp_gain: B and L must have the same row count");
  }
  MatrixXd s = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(b_mat).solve(l_mat);
  const double residual = (b_mat * s - l_mat).norm();
  return {std::move(s), residual};
}

struct FtcGains {
  std::vector<MatrixXd> k1;
  std::vector<MatrixXd> s_comp;
  std::vector<double> comp_residual;
  double zeta = 2.0;
  double rho = 700.0;
};

struct UioDesign {
  std::vector<MatrixXd> h_proj;
  std::vector<MatrixXd> k2;
  std::vector<MatrixXd> a_bar;
};

// Everything the online loop needs, one entry per bank model.
struct Design {
  FtcGains ftc;
  UioDesign uio;
  std::vector<MatrixXd> k_nominal;  // Luenberger gains of the fault-free observer
};

inline Design design(const ModelBank& bank, double zeta, double rho) {
  bank.validate();
  Design d;
  d.ftc.zeta = zeta;
  d.ftc.rho = rho;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const LocalModel& model = bank.models[i];
    try {
      d.ftc.k1.push_back(feedback_gain(model, zeta, rho));
      CompensationGain comp = comp_gain(model.b, model.l);
      d.ftc.s_comp.push_back(std::move(comp.s));
      d.ftc.comp_residual.push_back(comp.residual);
      MatrixXd h = fault_projector(model.c, model.l);
      ObserverGain og = observer_gain(model, h);
      d.uio.h_proj.push_back(std::move(h));
      d.uio.a_bar.push_back(std::move(og.a_bar));
      d.uio.k2.push_back(std::move(og.k2));
      d.k_nominal.push_back(observer_gain(model, MatrixXd(0, model.p())).k2);
    } catch (const Error& e) {
      throw SynthesisError("model " + std::to_string(i) + ": " + e.what());
    }
  }
  return d;
}

// Augmented error matrix [[A - B K1, L H C A], [0, A_bar - K2 C]] of one model.
inline MatrixXd augmented_error_matrix(const LocalModel& model, const MatrixXd& k1, const MatrixXd& h_proj,
                                       const MatrixXd& a_bar, const MatrixXd& k2) {
  const Eigen::Index n = model.n();
  MatrixXd out = MatrixXd::Zero(2 * n, 2 * n);
  out.topLeftCorner(n, n) = model.a - model.b * k1;
  if (h_proj.rows() > 0) out.topRightCorner(n, n) = model.l * h_proj * model.c * model.a;
  out.bottomRightCorner(n, n) = a_bar - k2 * model.c;
  return out;
}

}  // namespace trms

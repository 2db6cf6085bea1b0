#pragma once

#include <algorithm>
#include <complex>
#include <limits>

#include <Eigen/Dense>

#include "trms/errors.hpp"

namespace trms {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Largest real part over the spectrum of a square matrix.
inline double spectral_abscissa(const MatrixXd& m) {
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

inline bool is_hurwitz(const MatrixXd& m) { return spectral_abscissa(m) < 0.0; }

inline Eigen::VectorXcd eigenvalues(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues();
}

inline int numerical_rank(const MatrixXd& m, double rel_tol = 1e-10) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double cutoff = rel_tol * std::max(1.0, sv(0));
  return static_cast<int>((sv.array() > cutoff).count());
}

namespace detail {

// PBH: every eigenvalue of `a` with Re >= -margin must keep [lambda I - a; c]
// at full column rank (stacked = true) or [lambda I - a, c] at full row rank.
inline bool pbh_full_rank(const MatrixXd& a, const MatrixXd& c, bool stacked, double margin) {
  const Eigen::Index n = a.rows();
  const Eigen::VectorXcd lambdas = eigenvalues(a);
  const double scale = std::max(1.0, a.norm() + c.norm());
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
    const std::complex<double> lambda = lambdas(k);
    // Marginal modes computed as tiny negatives still need the rank test.
    if (lambda.real() < -margin * scale) continue;
    Eigen::MatrixXcd shifted = lambda * Eigen::MatrixXcd::Identity(n, n) - a.cast<std::complex<double>>();
    Eigen::MatrixXcd test;
    if (stacked) {
      test.resize(n + c.rows(), n);
      test << shifted, c.cast<std::complex<double>>();
    } else {
      test.resize(n, n + c.cols());
      test << shifted, c.cast<std::complex<double>>();
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(test);
    const double smallest = svd.singularValues()(std::min(test.rows(), test.cols()) - 1);
    if (smallest <= 1e-9 * scale) return false;
  }
  return true;
}

}  // namespace detail

// (a, b) stabilizable: no uncontrollable mode with Re >= 0.
inline bool is_stabilizable(const MatrixXd& a, const MatrixXd& b) {
  return detail::pbh_full_rank(a, b, false, 1e-8);
}

// (a, c) detectable: no unobservable mode with Re >= 0.
inline bool is_detectable(const MatrixXd& a, const MatrixXd& c) {
  return detail::pbh_full_rank(a, c, true, 1e-8);
}

// Solves a^T X + X a + q = 0 by vectorization. Intended for the small
// (n <= ~15) systems handled here.
inline MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q) {
  const Eigen::Index n = a.rows();
  const Eigen::Index nn = n * n;
  MatrixXd kron = MatrixXd::Zero(nn, nn);
  const MatrixXd at = a.transpose();
  // vec(a^T X) = (I kron a^T) vec X ; vec(X a) = (a^T kron I) vec X
  for (Eigen::Index i = 0; i < n; ++i) {
    kron.block(i * n, i * n, n, n) += at;
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n).diagonal().array() += at(i, j);
    }
  }
  const VectorXd rhs = -Eigen::Map<const VectorXd>(q.data(), nn);
  Eigen::FullPivLU<MatrixXd> lu(kron);
  if (!lu.isInvertible()) {
    throw SynthesisError("solve_lyapunov: operator is singular (a and -a share an eigenvalue)");
  }
  VectorXd x = lu.solve(rhs);
  MatrixXd out = Eigen::Map<MatrixXd>(x.data(), n, n);
  return 0.5 * (out + out.transpose());
}

}  // namespace trms

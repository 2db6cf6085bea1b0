#include <algorithm>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "trms/multimodel.hpp"
#include "trms/synthesis.hpp"

using namespace trms;

namespace {

const ModelBank& default_bank() {
  static const ModelBank bank = build_bank(TrmsParams{}, {-0.4, 0.0, 0.4}, 0.25);
  return bank;
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

// Greedy nearest matching; returns the worst pair distance.
double spectrum_distance(Eigen::VectorXcd a, Eigen::VectorXcd b) {
  double worst = 0.0;
  std::vector<bool> used(static_cast<std::size_t>(b.size()), false);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double best = INFINITY;
    Eigen::Index arg = -1;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double d = std::abs(a(i) - b(j));
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    used[static_cast<std::size_t>(arg)] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

// Integral of x^T x over [0, t_end] for x' = (A - B K) x.
double regulation_cost(const MatrixXd& closed, const VectorXd& x0, double t_end) {
  const double dt = 1e-3;
  VectorXd x = x0;
  double cost = 0.0;
  for (int k = 0; k < static_cast<int>(t_end / dt); ++k) {
    const VectorXd next = rk4_step([&](const VectorXd& s) { return VectorXd(closed * s); }, x, dt);
    cost += 0.5 * dt * (x.squaredNorm() + next.squaredNorm());
    x = next;
  }
  return cost;
}

}  // namespace

TEST(FaultProjector, IdentityGram) {
  const MatrixXd h = fault_projector(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2));
  EXPECT_LT((h - MatrixXd::Identity(2, 2)).norm(), 1e-15);
}

TEST(FaultProjector, SingleColumn) {
  MatrixXd l(2, 1);
  l << 2.0, 0.0;
  const MatrixXd h = fault_projector(MatrixXd::Identity(2, 2), l);
  ASSERT_EQ(h.rows(), 1);
  EXPECT_NEAR(h(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(h(0, 1), 0.0, 1e-15);
}

TEST(FaultProjector, RandomFullRankIsLeftInverse) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd c = random_matrix(4, 6, rng);
    const MatrixXd l = random_matrix(6, 1 + trial % 3, rng);
    const MatrixXd h = fault_projector(c, l);
    EXPECT_LT((h * c * l - MatrixXd::Identity(l.cols(), l.cols())).norm(), 1e-10);
    // Independent solve: least squares by QR.
    const MatrixXd ref = (c * l).colPivHouseholderQr().solve(MatrixXd::Identity(4, 4));
    EXPECT_LT((h - ref).norm(), 1e-9 * std::max(1.0, ref.norm()));
  }
}

TEST(FaultProjector, Degenerate) {
  EXPECT_EQ(fault_projector(MatrixXd::Identity(3, 3), MatrixXd(3, 0)).rows(), 0);
  MatrixXd l(3, 2);
  l << 1, 2, 1, 2, 0, 0;
  EXPECT_THROW(fault_projector(MatrixXd::Identity(3, 3), l), SynthesisError);
  EXPECT_THROW(fault_projector(MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2)), std::invalid_argument);
}

TEST(Care, ScalarIntegrator) {
  const MatrixXd one = MatrixXd::Identity(1, 1);
  const MatrixXd p = solve_care(MatrixXd::Zero(1, 1), one, one, one);
  EXPECT_NEAR(p(0, 0), 1.0, 1e-12);
}

TEST(Care, ZeroCostOnStablePlant) {
  MatrixXd a(2, 2);
  a << -1.0, 2.0, 0.0, -3.0;
  const MatrixXd p = solve_care(a, MatrixXd::Identity(2, 1), MatrixXd::Zero(2, 2), MatrixXd::Identity(1, 1));
  EXPECT_LT(p.norm(), 1e-12);
}

TEST(Care, RandomInstancesSolveToTightResidual) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd a = random_matrix(4, 4, rng);
    if (trial % 2 == 0) a -= (spectral_abscissa(a) + 0.5) * MatrixXd::Identity(4, 4);  // stable half
    const MatrixXd b = random_matrix(4, 2, rng);
    const MatrixXd qf = random_matrix(4, 4, rng);
    const MatrixXd q = qf * qf.transpose() + 0.1 * MatrixXd::Identity(4, 4);
    const MatrixXd r = MatrixXd::Identity(2, 2) * 0.5;
    const MatrixXd p = solve_care(a, b, q, r);
    EXPECT_LE(care_residual(a, b, q, r, p), 1e-8) << "trial " << trial;
    EXPECT_LT((p - p.transpose()).norm(), 1e-12);
    EXPECT_TRUE(is_hurwitz(a - b * r.inverse() * b.transpose() * p));
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatrixXd>(p).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Care, AbortsOnImaginaryAxisHamiltonian) {
  MatrixXd a(2, 2);
  a << 0.0, 1.0, -1.0, 0.0;
  // Oscillator with no input and no state weight: eigenvalues +-i stay.
  EXPECT_THROW(solve_care(a, MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 2), MatrixXd::Identity(1, 1)), SynthesisError);
}

TEST(Care, ValidatesArguments) {
  const MatrixXd i2 = MatrixXd::Identity(2, 2);
  MatrixXd asym = i2;
  asym(0, 1) = 1.0;
  EXPECT_THROW(solve_care(i2, i2, asym, i2), std::invalid_argument);
  EXPECT_THROW(solve_care(i2, i2, -i2, i2), std::invalid_argument);
  EXPECT_THROW(solve_care(i2, i2, i2, -i2), std::invalid_argument);
  EXPECT_THROW(solve_care(i2, MatrixXd::Identity(3, 2), i2, i2), std::invalid_argument);
}

TEST(FeedbackGain, DoubleIntegrator) {
  MatrixXd a(2, 2);
  a << 0, 1, 0, 0;
  MatrixXd b(2, 1);
  b << 0, 1;
  const LocalModel m = make_local_model(a, b, MatrixXd::Identity(2, 2), MatrixXd(2, 0), VectorXd::Zero(2));
  const MatrixXd k = feedback_gain(m, 1.0, 1.0);
  EXPECT_LT(spectral_abscissa(a - b * k), -0.1);
}

TEST(FeedbackGain, StabilizesEveryBankModel) {
  for (const LocalModel& m : default_bank().models) {
    for (auto [zeta, rho] : {std::pair{2.0, 700.0}, std::pair{1.0, 100.0}, std::pair{0.0, 1.0}}) {
      EXPECT_LT(spectral_abscissa(m.a - m.b * feedback_gain(m, zeta, rho)), 0.0);
    }
  }
}

TEST(FeedbackGain, HeavierControlWeightLowersStateCost) {
  VectorXd x0 = VectorXd::Zero(6);
  x0(idx::kPitch) = 0.1;
  x0(idx::kYaw) = -0.1;
  for (const LocalModel& m : default_bank().models) {
    const double lo = regulation_cost(m.a - m.b * feedback_gain(m, 2.0, 7.0), x0, 1.0);
    const double hi = regulation_cost(m.a - m.b * feedback_gain(m, 2.0, 700.0), x0, 1.0);
    EXPECT_LT(hi, lo);
  }
}

TEST(FeedbackGain, RejectsBadWeights) {
  const LocalModel& m = default_bank().models[0];
  EXPECT_THROW(feedback_gain(m, -1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(feedback_gain(m, 1.0, 0.0), std::invalid_argument);
}

TEST(ObserverGain, DecouplingIdentitiesAndStability) {
  for (const LocalModel& m : default_bank().models) {
    const MatrixXd h = fault_projector(m.c, m.l);
    const ObserverGain og = observer_gain(m, h);
    EXPECT_LT((h * m.c * m.l - MatrixXd::Identity(m.s(), m.s())).cwiseAbs().maxCoeff(), 1e-10);
    const MatrixXd proj = MatrixXd::Identity(6, 6) - m.l * h * m.c;
    EXPECT_LT((proj * m.l).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((og.a_bar - proj * m.a).norm(), 1e-14);
    EXPECT_LT(spectral_abscissa(og.a_bar - og.k2 * m.c), 0.0);
  }
}

TEST(ObserverGain, EmptyProjectorIsLuenberger) {
  const LocalModel& m = default_bank().models[1];
  const ObserverGain og = observer_gain(m, MatrixXd(0, m.p()));
  EXPECT_EQ(og.a_bar, m.a);
  EXPECT_LT(spectral_abscissa(m.a - og.k2 * m.c), 0.0);
}

TEST(CompGain, ActuatorFaultsGiveIdentity) {
  const LocalModel& m = default_bank().models[0];
  const CompensationGain g = comp_gain(m.b, m.b);
  EXPECT_LT((g.s - MatrixXd::Identity(2, 2)).norm(), 1e-12);
  EXPECT_LT(g.residual, 1e-12);
}

TEST(CompGain, ZeroFaultMatrix) {
  const LocalModel& m = default_bank().models[0];
  const CompensationGain g = comp_gain(m.b, MatrixXd::Zero(6, 2));
  EXPECT_EQ(g.s.norm(), 0.0);
  EXPECT_EQ(g.residual, 0.0);
}

TEST(CompGain, MatchesNormalEquations) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd b = random_matrix(6, 2, rng);
    const MatrixXd l = random_matrix(6, 1 + trial % 3, rng);
    const CompensationGain g = comp_gain(b, l);
    const MatrixXd s_ref = (b.transpose() * b).inverse() * b.transpose() * l;
    EXPECT_NEAR(g.residual, (b * s_ref - l).norm(), 1e-10);
    EXPECT_LT((g.s - s_ref).norm(), 1e-10);
  }
}

TEST(Design, DefaultBankIsStableWithMargin) {
  const Design d = design(default_bank(), 2.0, 700.0);
  ASSERT_EQ(d.ftc.k1.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const LocalModel& m = default_bank().models[i];
    EXPECT_LT(spectral_abscissa(m.a - m.b * d.ftc.k1[i]), -0.05);
    EXPECT_LT(spectral_abscissa(d.uio.a_bar[i] - d.uio.k2[i] * m.c), -0.05);
    EXPECT_LT(spectral_abscissa(m.a - d.k_nominal[i] * m.c), -0.05);
  }
}

TEST(Design, SeparationSpectrum) {
  const Design d = design(default_bank(), 2.0, 700.0);
  for (std::size_t i = 0; i < 3; ++i) {
    const LocalModel& m = default_bank().models[i];
    const MatrixXd a0 = augmented_error_matrix(m, d.ftc.k1[i], d.uio.h_proj[i], d.uio.a_bar[i], d.uio.k2[i]);
    EXPECT_EQ(a0.bottomLeftCorner(6, 6).norm(), 0.0);
    Eigen::VectorXcd blocks(12);
    blocks << eigenvalues(m.a - m.b * d.ftc.k1[i]), eigenvalues(d.uio.a_bar[i] - d.uio.k2[i] * m.c);
    EXPECT_LT(spectrum_distance(eigenvalues(a0), blocks), 1e-8);
  }
}

TEST(Design, ReportsFailingModel) {
  ModelBank bank = default_bank();
  bank.models[1].b.setZero();
  bank.models[1].l.setZero();
  try {
    design(bank, 2.0, 700.0);
    FAIL() << "expected SynthesisError";
  } catch (const SynthesisError& e) {
    EXPECT_NE(std::string(e.what()).find("model 1"), std::string::npos) << e.what();
  }
}

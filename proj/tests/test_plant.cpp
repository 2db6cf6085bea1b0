#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "trms/multimodel.hpp"
#include "trms/plant.hpp"

using namespace trms;

namespace {

// Reference values below come from tests/oracles/plant_oracle.py, which
// evaluates the published constants with plain floats and scipy.
constexpr double kRestAngle = -0.671184703751;

double pendulum_energy(const PlantState& x, const TrmsParams& p) {
  const double omega_v = angular_rates(x, p).pitch;
  const double a = x[idx::kPitch];
  return 0.5 * p.j_v * omega_v * omega_v - p.g * ((p.a_const - p.b_const) * std::sin(a) + p.c_const * std::cos(a));
}

PlantState simulate(PlantState x, const ControlInput& u, double dt, double t_end, const TrmsParams& p) {
  const long n = std::lround(t_end / dt);
  for (long k = 0; k < n; ++k) x = step(x, u, dt, p);
  return x;
}

}  // namespace

TEST(RotorMaps, SpeedPolynomials) {
  const TrmsParams p;
  EXPECT_EQ(rotor_speed(Rotor::main, 0.0, p), 0.0);
  EXPECT_EQ(rotor_speed(Rotor::tail, 0.0, p), 0.0);
  EXPECT_NEAR(rotor_speed(Rotor::main, 1.0, p), 624.59, 1e-9);
  EXPECT_NEAR(rotor_speed(Rotor::main, -1.0, p), -574.41, 1e-9);
  EXPECT_NEAR(rotor_speed(Rotor::tail, 1.0, p), 1465.50, 1e-9);
}

TEST(RotorMaps, ThrustPolynomials) {
  const TrmsParams p;
  EXPECT_EQ(thrust(Rotor::main, 0.0, p), 0.0);
  EXPECT_EQ(thrust(Rotor::tail, 0.0, p), 0.0);
  EXPECT_NEAR(thrust(Rotor::main, 100.0, p), 12.1092, 1e-9);
}

TEST(RotorMaps, RejectNonFinite) {
  const TrmsParams p;
  EXPECT_THROW(rotor_speed(Rotor::main, std::nan(""), p), std::invalid_argument);
  EXPECT_THROW(thrust(Rotor::tail, INFINITY, p), std::invalid_argument);
}

TEST(RotorMaps, LinearInEachCoefficient) {
  TrmsParams p;
  const double u = 0.7;
  for (std::size_t k = 0; k < p.speed_main.coeffs.size(); ++k) {
    TrmsParams q = p;
    q.speed_main.coeffs[k] += 3.0;
    const double delta = rotor_speed(Rotor::main, u, q) - rotor_speed(Rotor::main, u, p);
    EXPECT_NEAR(delta, 3.0 * std::pow(u, static_cast<double>(k + 1)), 1e-9) << "coefficient " << k;
  }
}

TEST(RotorMaps, PolynomialDerivative) {
  const OriginPolynomial poly{{2.0, -1.0, 0.5}};
  const double x = 1.3;
  const double h = 1e-6;
  EXPECT_NEAR(poly.derivative(x), (poly(x + h) - poly(x - h)) / (2 * h), 1e-7);
}

TEST(Torques, Gravity) {
  const TrmsParams p;
  EXPECT_NEAR(gravity_torque(0.0, p), -0.1547282250, 1e-9);
  EXPECT_NEAR(gravity_torque(std::numbers::pi / 2, p), -0.1948266, 1e-9);
  EXPECT_NEAR(gravity_torque(-0.6712, p), 0.0, 1e-4);
  EXPECT_NEAR(gravity_torque(kRestAngle, p), 0.0, 1e-12);
  EXPECT_NEAR(rest_angle(p), kRestAngle, 1e-11);
}

TEST(Torques, Centrifugal) {
  const TrmsParams p;
  EXPECT_EQ(centrifugal_torque(0.3, 0.0, p), 0.0);
  EXPECT_EQ(centrifugal_torque(0.0, 5.0, p), 0.0);
  EXPECT_NEAR(centrifugal_torque(std::numbers::pi / 4, 1.0, p), -0.024105, 1e-9);
}

TEST(Torques, HorizontalInertia) {
  const TrmsParams p;
  EXPECT_NEAR(horizontal_inertia(0.0, p), 0.05611, 1e-12);
  EXPECT_NEAR(horizontal_inertia(std::numbers::pi / 2, p), 0.010975, 1e-12);
  for (double a : {0.1, 0.7, 1.3, 2.9}) EXPECT_DOUBLE_EQ(horizontal_inertia(a, p), horizontal_inertia(-a, p));
}

TEST(AngularRates, Examples) {
  const TrmsParams p;
  PlantState x = PlantState::Zero();
  auto r = angular_rates(x, p);
  EXPECT_EQ(r.pitch, 0.0);
  EXPECT_EQ(r.yaw, 0.0);
  x[idx::kPitchMomentum] = 1.0;
  EXPECT_EQ(angular_rates(x, p).pitch, 1.0);
  x.setZero();
  x[idx::kTailMotor] = 1.0;
  EXPECT_NEAR(angular_rates(x, p).pitch, 0.7003994734, 1e-9);
}

TEST(Dynamics, ZeroStateZeroInput) {
  const TrmsParams p;
  const PlantState dx = dynamics(PlantState::Zero(), ControlInput::Zero(), p);
  EXPECT_NEAR(dx[idx::kPitchMomentum], -2.7905104783, 1e-9);
  EXPECT_EQ(dx[idx::kMainMotor], 0.0);
  EXPECT_EQ(dx[idx::kTailMotor], 0.0);
  EXPECT_EQ(dx[idx::kPitch], 0.0);
}

TEST(Dynamics, BitwiseDeterministic) {
  const TrmsParams p;
  PlantState x;
  x << 0.2, -0.1, 0.8, 0.4, 0.05, -0.3;
  const ControlInput u(1.1, -0.4);
  const PlantState a = dynamics(x, u, p);
  const PlantState b = dynamics(x, u, p);
  for (int i = 0; i < kStateDim; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Params, ValidateRejectsBadValues) {
  TrmsParams p;
  EXPECT_NO_THROW(p.validate());
  p.j_v = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = TrmsParams{};
  p.d_const = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = TrmsParams{};
  p.thrust_tail.coeffs[0] = NAN;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Step, RejectsNonPositiveDt) {
  EXPECT_THROW(step(PlantState::Zero(), ControlInput::Zero(), 0.0, TrmsParams{}), std::invalid_argument);
}

TEST(Step, LocalConsistency) {
  const TrmsParams p;
  PlantState x;
  x << 0.1, 0.2, 0.5, -0.2, 0.1, 0.3;
  const ControlInput u(0.9, 0.2);
  const PlantState f = dynamics(x, u, p);
  double prev = 0.0;
  for (double dt : {1e-2, 5e-3}) {
    const double err = (step(x, u, dt, p) - x - dt * f).norm();
    if (prev > 0.0) EXPECT_NEAR(prev / err, 4.0, 0.5);
    prev = err;
  }
}

TEST(Step, FourthOrderConvergence) {
  const TrmsParams p;
  PlantState x0;
  x0 << 0.3, 0.0, 0.4, 0.0, 0.0, -0.2;
  const ControlInput u(1.2, 0.3);
  const PlantState ref = simulate(x0, u, 0.02 / 16, 1.0, p);
  const double e1 = (simulate(x0, u, 0.02, 1.0, p) - ref).norm();
  const double e2 = (simulate(x0, u, 0.01, 1.0, p) - ref).norm();
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Step, MatchesMatrixExponentialOnFrozenModel) {
  const TrmsParams p;
  const Trim op = trim(0.1, 0.0, p);
  const LocalModel m = linearize(p, op.state, op.input);
  const VectorXd u = op.input + Eigen::Vector2d(0.2, -0.1);
  VectorXd x0 = op.state;
  x0(idx::kPitch) += 0.05;
  x0(idx::kTailMotor) += 0.1;

  // Affine system as a homogeneous one: z = [x; 1].
  MatrixXd aug = MatrixXd::Zero(7, 7);
  aug.topLeftCorner(6, 6) = m.a;
  aug.topRightCorner(6, 1) = m.b * u + m.delta_x;
  VectorXd z0(7);
  z0 << x0, 1.0;
  const VectorXd exact = (aug * 1.0).exp() * z0;

  VectorXd x = x0;
  const VectorXd no_fault = VectorXd::Zero(m.s());
  for (int k = 0; k < 1000; ++k) x = rk4_step([&](const VectorXd& s) { return m.derivative(s, u, no_fault); }, x, 1e-3);
  EXPECT_LT((x - exact.head(6)).norm(), 1e-8);
}

TEST(Invariants, PendulumEnergyConserved) {
  TrmsParams p;
  p.k_v = 0.0;
  p.thrust_main.coeffs.assign(5, 0.0);
  p.thrust_tail.coeffs.assign(5, 0.0);
  PlantState x = PlantState::Zero();
  x[idx::kPitch] = 0.9;
  x[idx::kPitchMomentum] = -0.5;
  const double e0 = pendulum_energy(x, p);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    x = step(x, ControlInput::Zero(), 1e-3, p);
    worst = std::max(worst, std::abs(pendulum_energy(x, p) - e0) / std::abs(e0));
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_EQ(x[idx::kYaw], 0.0);
}

class RestAngleFromStart : public ::testing::TestWithParam<double> {};

TEST_P(RestAngleFromStart, SettlesAtRestAngle) {
  const TrmsParams p;
  PlantState x = PlantState::Zero();
  x[idx::kPitch] = GetParam();
  x = simulate(x, ControlInput::Zero(), 1e-3, 150.0, p);
  EXPECT_NEAR(x[idx::kPitch], kRestAngle, 0.01);
}

INSTANTIATE_TEST_SUITE_P(Starts, RestAngleFromStart, ::testing::Values(-1.4, -0.6, 0.0, 0.7, 1.4));

TEST(Trim, ResidualVanishes) {
  const TrmsParams p;
  for (double av : {-0.6, -0.4, -0.1, 0.0, 0.2, 0.4, 0.5}) {
    for (double ah : {0.0, 0.5, -1.0}) {
      const Trim t = trim(av, ah, p);
      EXPECT_LE(dynamics(t.state, t.input, p).norm(), 1e-8) << av << ", " << ah;
      EXPECT_EQ(t.state[idx::kPitch], av);
      EXPECT_EQ(t.state[idx::kYaw], ah);
      EXPECT_EQ(t.input[1], 0.0);
    }
  }
}

TEST(Trim, ZeroInputAtRestAngle) {
  const TrmsParams p;
  const Trim t = trim(rest_angle(p), 0.0, p);
  EXPECT_NEAR(t.input[0], 0.0, 1e-6);
}

TEST(Trim, RejectsInfeasibleRequests) {
  const TrmsParams p;
  EXPECT_THROW(trim(std::numbers::pi / 2, 0.0, p), InfeasibleTrim);
  EXPECT_THROW(trim(0.4, 0.0, p, 0.1), InfeasibleTrim);
  EXPECT_THROW(trim(NAN, 0.0, p), std::invalid_argument);
}

TEST(Trim, PitchTrimIncreasesWithAngle) {
  const TrmsParams p;
  double prev = -INFINITY;
  for (double av : {-0.6, -0.3, 0.0, 0.2, 0.4}) {
    const double u = trim(av, 0.0, p).input[0];
    EXPECT_GT(u, prev);
    prev = u;
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "adpmpc/perunit.hpp"
#include "test_util.hpp"

using namespace adpmpc;

namespace {

// Plain Taylor series with a fixed number of terms, no scaling.
Eigen::Matrix4d taylor_exp(const Eigen::Matrix4d& m, int terms) {
  Eigen::Matrix4d sum = Eigen::Matrix4d::Identity(), term = Eigen::Matrix4d::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * m / double(k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("default parameters are the drive's rated values") {
  const PerUnitParams p;
  CHECK(p.Rs == 0.0108);
  CHECK(p.Rr == 0.0091);
  CHECK(p.Xls == 0.1493);
  CHECK(p.Xlr == 0.1104);
  CHECK(p.Xm == 2.3489);
  CHECK(p.Vdc == 1.930);
  CHECK(p.Ts == 25e-6);
  CHECK(p.omega_b == doctest::Approx(2.0 * std::numbers::pi * 50.0));
  CHECK(p.That() == doctest::Approx(7.853981633974483e-3).epsilon(1e-14));
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("parameter validation rejects non-physical values") {
  PerUnitParams p;
  p.Rs = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.Xm = 10.0;
  p.Xls = -5.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.Ts = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.Vdc = std::nan("");
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("Clarke transform") {
  Eigen::Vector2d v = clarke({1.0, -0.5, -0.5});
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.0));
  v = clarke({1.0, 1.0, 1.0});
  CHECK(v.norm() < 1e-15);
  v = clarke({1.0, 0.0, 0.0});
  CHECK(v[0] == doctest::Approx(2.0 / 3.0));
  CHECK(v[1] == doctest::Approx(0.0));

  const Eigen::Vector3d w = inverse_clarke({1.0, 0.0});
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(-0.5));
  CHECK(w[2] == doctest::Approx(-0.5));
  CHECK(inverse_clarke({0.0, 0.0}).norm() == 0.0);

  const Eigen::Vector2d x(0.3, -0.7);
  CHECK((clarke(inverse_clarke(x)) - x).norm() < 1e-15);
  CHECK((clarke_matrix() * inverse_clarke_matrix() - Eigen::Matrix2d::Identity()).norm() < 1e-15);
}

TEST_CASE("inverter voltage") {
  const PerUnitParams p;
  CHECK(inverter_voltage({1, 1, 1}, p).norm() < 1e-15);
  Eigen::Vector2d v = inverter_voltage({1, 0, 0}, p);
  CHECK(v[0] == doctest::Approx(0.6433333333333333).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(0.0));
  // Explicit row-by-row multiplication with the amplitude-invariant matrix.
  v = inverter_voltage({0, 1, -1}, p);
  const double beta = 0.965 * (2.0 / 3.0) * (std::sqrt(3.0) / 2.0 * 1.0 - std::sqrt(3.0) / 2.0 * -1.0);
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(beta).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(1.1142860195).epsilon(1e-9));
}

TEST_CASE("switch positions") {
  CHECK_THROWS_AS(SwitchPosition(2, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(SwitchPosition(0, 0, -2), std::invalid_argument);
  for (int i = 0; i < 27; ++i) CHECK(SwitchPosition::from_index(i).index() == i);
  CHECK(SwitchPosition(-1, -1, -1).index() == 0);
  CHECK(SwitchPosition(1, 1, 1).index() == 26);
  CHECK(SwitchPosition(0, -1, 1).index() == 11);
}

TEST_CASE("continuous model entries") {
  PerUnitParams p;
  const ContinuousModel cm = build_continuous(p);
  const double xr = 2.3489 + 0.1104, xs = 2.3489 + 0.1493;
  const double d = xs * xr - 2.3489 * 2.3489;
  const double tau_s = xr * d / (0.0108 * xr * xr + 0.0091 * 2.3489 * 2.3489);
  CHECK(cm.D_mat(0, 0) == doctest::Approx(-1.0 / tau_s).epsilon(1e-13));
  CHECK(cm.D_mat(1, 1) == doctest::Approx(-1.0 / tau_s).epsilon(1e-13));
  CHECK(cm.D_mat(2, 2) == doctest::Approx(-0.0091 / xr).epsilon(1e-13));
  CHECK(cm.D_mat(2, 3) == doctest::Approx(-p.omega_r));
  p.omega_r = 1.0;
  CHECK(build_continuous(p).D_mat(2, 3) == -1.0);
  CHECK(build_continuous(p).D_mat(3, 2) == 1.0);

  const Eigen::Vector4d s(0.1, -0.2, 0.3, 0.4);
  const Eigen::Vector2d y = cm.F_mat * s;
  CHECK(y[0] == 0.1);
  CHECK(y[1] == -0.2);
}

TEST_CASE("matrix exponential") {
  testutil::Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix4d m = rng.matrix(4, 4, -0.2, 0.2);
    CHECK((expm(m) - taylor_exp(m, 30)).cwiseAbs().maxCoeff() < 1e-14);
  }
  // Large norm needs scaling and squaring: exp(a I) = e^a I.
  const Eigen::MatrixXd big = 7.5 * Eigen::MatrixXd::Identity(3, 3);
  CHECK(expm(big)(0, 0) == doctest::Approx(std::exp(7.5)).epsilon(1e-12));
  // Rotation generator.
  Eigen::Matrix2d rot;
  rot << 0.0, -2.0, 2.0, 0.0;
  const Eigen::MatrixXd e = expm(rot);
  CHECK(e(0, 0) == doctest::Approx(std::cos(2.0)).epsilon(1e-13));
  CHECK(e(1, 0) == doctest::Approx(std::sin(2.0)).epsilon(1e-13));
}

TEST_CASE("zero-order-hold discretization") {
  const PerUnitParams p;
  const ContinuousModel cm = build_continuous(p);
  const DiscreteModel dm = discretize(cm, p);
  const double that = p.That();

  const Eigen::Matrix4d oracle = taylor_exp(cm.D_mat * that, 20);
  CHECK((dm.A_ph - oracle).cwiseAbs().maxCoeff() < 1e-15);
  // The first-order approximation is off by the second-order term, about
  // 1.1e-4 for these parameters.
  const Eigen::Matrix4d dt = cm.D_mat * that;
  const Eigen::Matrix4d first_order = Eigen::Matrix4d::Identity() + dt;
  CHECK((dm.A_ph - first_order - 0.5 * dt * dt).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((dm.A_ph - first_order).cwiseAbs().maxCoeff() < 1.2e-4);

  // B = int_0^T exp(D s) ds E by the series T sum (DT)^k/(k+1)!.
  Eigen::Matrix4d integral = Eigen::Matrix4d::Zero(), term = Eigen::Matrix4d::Identity() * that;
  for (int k = 0; k < 20; ++k) {
    integral += term;
    term = term * cm.D_mat * that / double(k + 2);
  }
  CHECK((dm.B_ph - integral * cm.E_mat).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::Vector4cd ev = dm.A_ph.eigenvalues();
  CHECK(ev.cwiseAbs().maxCoeff() < 1.0);

  ContinuousModel zero;
  zero.D_mat.setZero();
  zero.E_mat = Eigen::Matrix<double, 4, 3>::Constant(0.5);
  zero.F_mat.setZero();
  const DiscreteModel dz = discretize(zero, 0.01);
  CHECK(dz.A_ph == Eigen::Matrix4d::Identity());
  CHECK((dz.B_ph - 0.01 * zero.E_mat).norm() < 1e-17);
  CHECK_THROWS_AS(discretize(cm, 0.0), std::invalid_argument);
}

TEST_CASE("electromagnetic torque") {
  const PerUnitParams p;
  CHECK(torque({0.0, 1.0, 1.0, 0.0}, p) == doctest::Approx(2.3489 / 2.4593));
  CHECK(torque({0.3, 0.6, 0.5, 1.0}, p) == doctest::Approx(0.0));
  CHECK(torque({-0.6, 0.8, 0.8, 0.6}, p) == doctest::Approx(0.955109177).epsilon(1e-9));
}

TEST_CASE("plant step") {
  const PerUnitParams p;
  const DiscreteModel dm = discretize(build_continuous(p), p);
  CHECK(step_plant(PhysState(), {0, 0, 0}, dm).x.norm() == 0.0);
  CHECK((step_plant(PhysState(), {1, 0, 0}, dm).x - dm.B_ph.col(0)).norm() == 0.0);
  const PhysState s(0.2, -0.4, 0.9, 0.1);
  const PhysState two = step_plant(step_plant(s, {0, 0, 0}, dm), {0, 0, 0}, dm);
  CHECK((two.x - dm.A_ph * dm.A_ph * s.x).norm() < 1e-15);
}

TEST_CASE("steady state is a periodic orbit of the continuous model") {
  const PerUnitParams p;
  const ContinuousModel cm = build_continuous(p);
  // On the orbit the flux equation holds with d/dt = rotation at 1 pu:
  // dpsi/dt = (Xm/tau_r) i - psi/tau_r + omega_r J psi  and  dpsi/dt = J psi.
  Eigen::Matrix2d jm;
  jm << 0.0, -1.0, 1.0, 0.0;
  for (double ang : {0.0, 0.7, 2.5}) {
    const PhysState s = steady_state(p, 1.0, ang);
    CHECK(s.current().norm() == doctest::Approx(1.0));
    const Eigen::Vector2d dpsi = cm.D_mat.block<2, 2>(2, 0) * s.current() + cm.D_mat.block<2, 2>(2, 2) * s.flux();
    CHECK((dpsi - jm * s.flux()).norm() < 1e-12);
  }
  // At the default slip, rated current gives about 0.785 pu torque.
  CHECK(torque(steady_state(p, 1.0, 0.3), p) == doctest::Approx(0.785).epsilon(0.01));
}

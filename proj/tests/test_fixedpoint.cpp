#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "adpmpc/fixedpoint.hpp"
#include "test_util.hpp"

using namespace adpmpc;
using namespace adpmpc::layout;

namespace {

const FixedFormat kState{2, 22, true};

// A tail of moderate size so that candidate costs stay inside Q(2,22).
QuadValueFunction small_tail(testutil::Rng& rng, double scale) {
  QuadValueFunction vf;
  const Eigen::MatrixXd a = rng.matrix(kNx, kNx);
  vf.P = scale * a * a.transpose();
  vf.P.row(kConst).setZero();
  vf.P.col(kConst).setZero();
  vf.q = 0.1 * scale * rng.vector(kNx);
  vf.q[kConst] = 0.0;
  return vf;
}

Vec12 random_state(testutil::Rng& rng) {
  Vec12 z;
  z.segment<4>(kPhys) = rng.vector(4, -1.2, 1.2);
  const double ang = rng.uniform(0.0, 2.0 * M_PI), amp = rng.uniform(0.0, 1.0);
  z.segment<2>(kOsc) << amp * std::sin(ang), -amp * std::cos(ang);
  z.segment<2>(kFlt) = rng.vector(2, 0.6, 1.4);
  z[kConst] = 1.0;
  for (int i = 0; i < 3; ++i) z[kUprev + i] = rng.integer(-1, 1);
  return z;
}

}  // namespace

TEST_CASE("format bounds") {
  CHECK(kState.max_raw() == (1 << 23) - 1);
  CHECK(kState.min_raw() == -(1 << 23));
  CHECK(kState.resolution() == std::ldexp(1.0, -22));
  CHECK(kState.max_value() == 2.0 - std::ldexp(1.0, -22));
  CHECK(kState.min_value() == -2.0);
  const FixedFormat u4{4, 0, true};
  CHECK(u4.max_raw() == 7);
  CHECK(u4.min_raw() == -8);
  const FixedFormat uns{8, 0, false};
  CHECK(uns.max_raw() == 255);
  CHECK(uns.min_raw() == 0);
  CHECK_THROWS_AS((FixedFormat{0, 10, true}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((FixedFormat{40, 30, true}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((FixedFormat{-1, 3, true}.validate()), std::invalid_argument);
  CHECK_NOTHROW((FixedFormat{1, 63, true}.validate()));
}

TEST_CASE("quantization rounds to nearest and saturates") {
  QuantizationAudit audit;
  CHECK(quantize(0.5, kState, &audit).raw == (1 << 21));
  CHECK(quantize(std::ldexp(1.0, -23), kState, &audit).raw == 0);      // tie, even neighbour 0
  CHECK(quantize(3.0 * std::ldexp(1.0, -23), kState, &audit).raw == 2);  // tie, even neighbour 2
  CHECK(quantize(-std::ldexp(1.0, -23), kState, &audit).raw == 0);
  CHECK(quantize(-3.0 * std::ldexp(1.0, -23), kState, &audit).raw == -2);
  CHECK(audit.saturations == 0);
  const FixedScalar big = quantize(5.0, kState, &audit);
  CHECK(big.raw == kState.max_raw());
  CHECK(big.value() == doctest::Approx(1.99999976).epsilon(1e-8));
  CHECK(quantize(-5.0, kState, &audit).raw == kState.min_raw());
  CHECK(quantize(std::nan(""), kState, &audit).raw == 0);
  CHECK(audit.saturations == 3);
  CHECK(audit.conversions == 8);
  CHECK(audit.max_abs_error == std::ldexp(1.0, -23));

  testutil::Rng rng(51);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.uniform(-1.9, 1.9);
    CHECK(std::abs(quantize(x, kState).value() - x) <= std::ldexp(1.0, -23));
  }
}

TEST_CASE("shift rounding ties to even") {
  CHECK(round_shift(5, 1) == 2);    // 2.5
  CHECK(round_shift(7, 1) == 4);    // 3.5
  CHECK(round_shift(-5, 1) == -2);  // -2.5
  CHECK(round_shift(-7, 1) == -4);  // -3.5
  CHECK(round_shift(6, 2) == 2);    // 1.5
  CHECK(round_shift(5, 2) == 1);    // 1.25
  CHECK(round_shift(-5, 2) == -1);  // -1.25
  CHECK(round_shift(-6, 2) == -2);  // -1.5
  CHECK(round_shift(3, 0) == 3);
  CHECK(round_shift(3, -2) == 12);
  for (long v = -1000; v <= 1000; ++v)
    for (int s = 1; s <= 5; ++s) {
      const double exact = static_cast<double>(v) / (1 << s);
      CHECK(static_cast<long>(round_shift(v, s)) == static_cast<long>(std::nearbyint(exact)));
    }
}

TEST_CASE("arithmetic helpers") {
  QuantizationAudit audit;
  const FixedScalar a = quantize(1.5, kState), b = quantize(1.25, kState);
  CHECK(audit.saturations == 0);
  CHECK(fixed_mul(a, b, kState).value() == 1.875);
  CHECK(fixed_add(a, b, kState, &audit).raw == kState.max_raw());
  CHECK(audit.saturations == 1);
  const FixedScalar c = quantize(-0.75, kState);
  CHECK(fixed_mul(a, c, kState).value() == -1.125);
  CHECK(fixed_add(a, c, kState).value() == 0.75);
  CHECK(saturate(static_cast<__int128>(1) << 80, kState) == kState.max_raw());
}

TEST_CASE("profile validation") {
  FixedProfile p;
  CHECK_NOTHROW(p.validate());
  p.input = {4, 2, true};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.cost = {2, 20, true};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.coeff = {40, 22, true};
  p.state = {20, 22, true};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("fixed-point costs track the floating-point costs") {
  const PerUnitParams params;
  const ControllerTuning tuning;
  testutil::Rng rng(52);
  for (int N = 1; N <= 2; ++N) {
    const QuadValueFunction tail = small_tail(rng, 0.02);
    FixedAdpController fx(params, tuning, tail, N);
    const CondensedQP& qp = fx.qp();
    const int dim = 6 * N;
    // Multiply-accumulate terms behind one candidate cost: the quadratic form,
    // the linear term and the 12-term products that form f(x0).
    const double bound = std::ldexp(1.0, -22) * (dim * dim + dim * (kNx + 1));
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
      const Vec12 z = random_state(rng);
      fx.decide_state(z);
      const std::vector<double> fixed = fx.last_costs();
      const Eigen::VectorXd f = qp.f(z);
      const SwitchPosition prev(static_cast<int>(z[kUprev]), static_cast<int>(z[kUprev + 1]),
                                static_cast<int>(z[kUprev + 2]));
      for (int i = 0; i < qp.candidates(); ++i) {
        if (!fx.last_feasible()[static_cast<std::size_t>(i)]) continue;
        const double ref = qp.cost(qp.sequence_input(i, prev), f);
        worst = std::max(worst, std::abs(fixed[static_cast<std::size_t>(i)] - ref));
      }
    }
    MESSAGE("N=" << N << " worst cost error " << worst << " bound " << bound);
    CHECK(worst <= bound);
    CHECK(fx.audit().costs.saturations == 0);
    CHECK(fx.audit().coefficients.saturations == 0);
  }
}

TEST_CASE("fixed-point decisions match floating point") {
  const PerUnitParams params;
  const ControllerTuning tuning;
  testutil::Rng rng(53);
  for (int N = 1; N <= 2; ++N) {
    const QuadValueFunction tail = small_tail(rng, 0.02);
    FixedAdpController fx(params, tuning, tail, N);
    int match = 0;
    const int n = 1000;
    for (int trial = 0; trial < n; ++trial) {
      const Vec12 z = random_state(rng);
      const ControlDecision a = fx.decide_state(z);
      const ControlDecision b = exhaustive_solve(fx.qp(), z);
      CHECK(a.feasible_count == b.feasible_count);
      match += a.index == b.index;
    }
    MESSAGE("N=" << N << " matches " << match << " / " << n);
    CHECK(match >= 990);
  }
}

TEST_CASE("fixed-point controller at the zero state") {
  const PerUnitParams params;
  const ControllerTuning tuning;
  QuadValueFunction tail;
  for (int i = 0; i < kNx; ++i)
    if (i < kFlt || i >= kUprev) tail.P(i, i) = 0.1;
  FixedAdpController fx(params, tuning, tail, 1);
  Vec12 z = Vec12::Zero();
  z[kConst] = 1.0;
  const ControlDecision d = fx.decide_state(z);
  CHECK(d.u_sw == SwitchPosition(0, 0, 0));
  CHECK(d.feasible_count == 27);
  CHECK(fx.last_costs()[static_cast<std::size_t>(d.index)] == 0.0);
}

TEST_CASE("fixed-point closed loop keeps the oscillator on its circle") {
  const PerUnitParams params;
  const ControllerTuning tuning;
  const DiscreteModel dm = discretize(build_continuous(params), params);
  testutil::Rng rng(54);
  FixedAdpController fx(params, tuning, small_tail(rng, 0.02), 1);
  ControllerMemory mem;
  mem.osc = OscState::at(1.0, 0.0);
  fx.initialize(mem);
  PhysState x = steady_state(params, 1.0, 0.0);
  for (int k = 0; k < 4000; ++k) {
    const ControlDecision d = fx.step(1.0, x);
    x = step_plant(x, d.u_sw, dm);
  }
  const FixedAudit& a = fx.audit();
  CHECK(a.steps == 4000);
  CHECK(a.renormalizations == 5);
  CHECK(a.max_osc_amplitude_error < 1e-4);
  CHECK(a.recursive.saturations == 0);
  std::ostringstream os;
  write_audit(os, fx.profile(), a);
  CHECK(os.str().find("Q(2,22)") != std::string::npos);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "adpmpc/condensed.hpp"
#include "adpmpc/controller.hpp"
#include "adpmpc/kernels.hpp"
#include "test_util.hpp"

using namespace adpmpc;
using namespace adpmpc::layout;

namespace {

AugmentedModel default_model() {
  const PerUnitParams p;
  return assemble_augmented(discretize(build_continuous(p), p), p, ControllerTuning{});
}

// Negative semidefinite-free random tail: symmetric P with the constant row
// cleared, so costs are bounded below on the region of interest.
QuadValueFunction random_tail(testutil::Rng& rng) {
  QuadValueFunction vf;
  const Eigen::MatrixXd a = rng.matrix(kNx, kNx);
  vf.P = a * a.transpose();
  vf.P.row(kConst).setZero();
  vf.P.col(kConst).setZero();
  vf.q = rng.vector(kNx);
  vf.q[kConst] = 0.0;
  vf.r = rng.uniform(-1.0, 1.0);
  return vf;
}

Vec12 random_state(testutil::Rng& rng) {
  Vec12 z = rng.vector(kNx);
  z.segment<2>(kFlt) = rng.vector(2, 0.5, 1.5);
  z[kConst] = 1.0;
  for (int i = 0; i < 3; ++i) z[kUprev + i] = rng.integer(-1, 1);
  return z;
}

SwitchPosition prev_of(const Vec12& z) {
  return {static_cast<int>(z[kUprev]), static_cast<int>(z[kUprev + 1]), static_cast<int>(z[kUprev + 2])};
}

// Objective by explicit simulation, written independently of the library.
double simulate_cost(const AugmentedModel& m, const QuadValueFunction& tail, Vec12 x, const std::vector<SwitchPosition>& seq) {
  double j = 0.0, g = 1.0;
  SwitchPosition prev = prev_of(x);
  for (const auto& u : seq) {
    j += g * (m.C * x).squaredNorm();
    Eigen::Vector3d p;
    for (int ph = 0; ph < 3; ++ph) p[ph] = std::abs(u[ph] - prev[ph]);
    Vec6 in;
    in << u.vec(), p;
    x = m.A * x + m.B * in;
    g *= m.tuning.gamma;
    prev = u;
  }
  return j + g * (x.dot(tail.P * x) + 2.0 * tail.q.dot(x) + tail.r);
}

bool admissible(const SwitchPosition& prev, const std::vector<SwitchPosition>& seq) {
  SwitchPosition last = prev;
  for (const auto& u : seq) {
    for (int ph = 0; ph < 3; ++ph)
      if (std::abs(u[ph] - last[ph]) > 1) return false;
    last = u;
  }
  return true;
}

std::vector<SwitchPosition> decode(int index, int N) {
  std::vector<SwitchPosition> seq;
  int div = 1;
  for (int k = 1; k < N; ++k) div *= 27;
  for (int k = 0; k < N; ++k) {
    seq.push_back(SwitchPosition::from_index((index / div) % 27));
    div /= 27;
  }
  return seq;
}

}  // namespace

TEST_CASE("sequence enumeration") {
  CHECK(sequence_count(1) == 27);
  CHECK(sequence_count(2) == 729);
  CHECK(sequence_count(3) == 19683);
  CHECK_THROWS_AS(sequence_count(0), std::invalid_argument);
  CHECK_THROWS_AS(sequence_count(4), std::invalid_argument);
  for (int N = 1; N <= 3; ++N)
    for (int i = 0; i < sequence_count(N); i += 37) {
      const auto seq = decode(i, N);
      for (int k = 0; k < N; ++k) CHECK(sequence_entry(i, k, N) == seq[static_cast<std::size_t>(k)]);
    }
  CHECK(sequence_entry(27 * 5 + 3, 0, 2).index() == 5);
  CHECK(sequence_entry(27 * 5 + 3, 1, 2).index() == 3);
}

TEST_CASE("no tail and one step: every candidate costs the same") {
  const AugmentedModel m = default_model();
  const CondensedQP qp = build_condensed(m, QuadValueFunction{}, 1);
  CHECK(qp.Q.isZero(0.0));
  CHECK(qp.f_x.isZero(0.0));
  CHECK(qp.f_0.isZero(0.0));
  CHECK_THROWS_AS(build_condensed(m, QuadValueFunction{}, 0), std::invalid_argument);
  QuadValueFunction bad;
  bad.r = std::nan("");
  CHECK_THROWS_AS(build_condensed(m, bad, 1), std::invalid_argument);
}

TEST_CASE("condensed cost differences equal rollout differences") {
  const AugmentedModel m = default_model();
  testutil::Rng rng(31);
  for (int N = 1; N <= 3; ++N) {
    const QuadValueFunction tail = random_tail(rng);
    const CondensedQP qp = build_condensed(m, tail, N);
    for (int trial = 0; trial < 40; ++trial) {
      const Vec12 x0 = random_state(rng);
      const int i = rng.integer(0, qp.candidates() - 1), j = rng.integer(0, qp.candidates() - 1);
      const Eigen::VectorXd ui = qp.sequence_input(i, prev_of(x0)), uj = qp.sequence_input(j, prev_of(x0));
      const double dq = qp.cost(ui, qp.f(x0)) - qp.cost(uj, qp.f(x0));
      const double dr = simulate_cost(m, tail, x0, decode(i, N)) - simulate_cost(m, tail, x0, decode(j, N));
      CHECK(std::abs(dq - dr) <= 1e-9 * (1.0 + std::abs(dr)));
      CHECK(rollout_cost(m, tail, x0, ui) == doctest::Approx(simulate_cost(m, tail, x0, decode(i, N))).epsilon(1e-12));
    }
  }
}

TEST_CASE("two steps without tail weigh only the first predicted stage") {
  const AugmentedModel m = default_model();
  const CondensedQP qp = build_condensed(m, QuadValueFunction{}, 2);
  testutil::Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const Vec12 x0 = random_state(rng);
    const int i = rng.integer(0, 728), j = rng.integer(0, 728);
    const auto si = decode(i, 2), sj = decode(j, 2);
    const Eigen::VectorXd ui = qp.sequence_input(i, prev_of(x0)), uj = qp.sequence_input(j, prev_of(x0));
    const Vec12 x1i = m.step(x0, ui.head<6>()), x1j = m.step(x0, uj.head<6>());
    const double expect = m.tuning.gamma * (m.stage_cost(x1i) - m.stage_cost(x1j));
    const double got = qp.cost(ui, qp.f(x0)) - qp.cost(uj, qp.f(x0));
    CHECK(std::abs(got - expect) <= 1e-9 * (1.0 + std::abs(expect)));
  }
}

TEST_CASE("switching constraints match the jump rule") {
  const AugmentedModel m = default_model();
  testutil::Rng rng(33);
  for (int N = 1; N <= 2; ++N) {
    const CondensedQP qp = build_condensed(m, random_tail(rng), N);
    for (int trial = 0; trial < 6; ++trial) {
      const Vec12 x0 = random_state(rng);
      const Eigen::VectorXd b = qp.b_ineq(x0);
      for (int i = 0; i < qp.candidates(); ++i)
        CHECK(qp.feasible(qp.sequence_input(i, prev_of(x0)), b) == admissible(prev_of(x0), decode(i, N)));
    }
  }
}

TEST_CASE("sequence table reproduces the stacked inputs") {
  const AugmentedModel m = default_model();
  testutil::Rng rng(34);
  const CondensedQP qp = build_condensed(m, random_tail(rng), 2);
  for (const SwitchPosition prev : {SwitchPosition(1, 0, -1), SwitchPosition(0, 0, 0)}) {
    for (int i = 0; i < qp.candidates(); i += 7) {
      if (!admissible(prev, decode(i, 2))) continue;
      Eigen::VectorXd u = qp.table.u_static.col(i);
      u.segment<3>(3) = p_from_inputs(decode(i, 2)[0], prev);
      CHECK((u - qp.sequence_input(i, prev)).norm() == 0.0);
      CHECK(qp.table.first_index[static_cast<std::size_t>(i)] == decode(i, 2)[0].index());
    }
  }
}

TEST_CASE("candidate kernels agree with the direct evaluation") {
  const AugmentedModel m = default_model();
  testutil::Rng rng(35);
  for (int N = 1; N <= 3; ++N) {
    const CondensedQP qp = build_condensed(m, random_tail(rng), N);
    for (int trial = 0; trial < (N == 3 ? 2 : 10); ++trial) {
      const Vec12 x0 = random_state(rng);
      const Eigen::VectorXd f = qp.f(x0), b = qp.b_ineq(x0);
      CandidateTable ref, ser, par;
      evaluate_candidates_reference(qp, f, b, prev_of(x0), kFloatCostBound, ref);
      evaluate_candidates_serial(qp, f, b, prev_of(x0), kFloatCostBound, ser);
      evaluate_candidates_parallel(qp, f, b, prev_of(x0), kFloatCostBound, par);
      REQUIRE(ref.cost.size() == static_cast<std::size_t>(qp.candidates()));
      CHECK(ser.feasible == ref.feasible);
      CHECK(par.feasible == ser.feasible);
      CHECK(par.cost == ser.cost);
      for (std::size_t i = 0; i < ref.cost.size(); ++i) {
        CHECK(static_cast<bool>(ref.feasible[i]) == admissible(prev_of(x0), decode(static_cast<int>(i), N)));
        if (ref.feasible[i]) CHECK(std::abs(ser.cost[i] - ref.cost[i]) <= 1e-9 * (1.0 + std::abs(ref.cost[i])));
        else CHECK(ser.cost[i] == kFloatCostBound);
      }
    }
  }
}

TEST_CASE("loop two keeps the last of equal minima and skips infeasible entries") {
  const double inf = kFloatCostBound;
  TableMinimum t = find_minimum({3.0, 1.0, 2.0, 1.0, 5.0}, {1, 1, 1, 1, 1}, inf);
  CHECK(t.index == 3);
  CHECK(t.cost == 1.0);
  CHECK(t.feasible_count == 5);
  t = find_minimum({3.0, 1.0, 2.0, 0.5}, {1, 1, 1, 0}, inf);
  CHECK(t.index == 1);
  CHECK(t.feasible_count == 3);
  t = find_minimum({inf, inf}, {0, 0}, inf);
  CHECK(t.index == -1);
  CHECK(t.feasible_count == 0);
  // A feasible candidate whose cost equals the sentinel is still selectable.
  t = find_minimum({inf, inf}, {0, 1}, inf);
  CHECK(t.index == 1);
}

TEST_CASE("exhaustive search") {
  const AugmentedModel m = default_model();
  testutil::Rng rng(36);
  const QuadValueFunction tail = random_tail(rng);
  const CondensedQP qp1 = build_condensed(m, tail, 1);

  Vec12 x0 = random_state(rng);
  x0.segment<3>(kUprev).setZero();
  ControlDecision d = exhaustive_solve(qp1, x0);
  CHECK(d.candidates_evaluated == 27);
  CHECK(d.feasible_count == 27);
  x0.segment<3>(kUprev).setOnes();
  d = exhaustive_solve(qp1, x0);
  CHECK(d.feasible_count == 8);
  CHECK(d.p == p_from_inputs(d.u_sw, {1, 1, 1}));

  for (int N = 1; N <= 2; ++N) {
    const CondensedQP qp = build_condensed(m, tail, N);
    for (int trial = 0; trial < 100; ++trial) {
      const Vec12 z = random_state(rng);
      double best = std::numeric_limits<double>::infinity();
      int best_i = -1;
      for (int i = 0; i < qp.candidates(); ++i) {
        const auto seq = decode(i, N);
        if (!admissible(prev_of(z), seq)) continue;
        const double c = simulate_cost(m, tail, z, seq);
        if (c <= best) {
          best = c;
          best_i = i;
        }
      }
      const ControlDecision s = exhaustive_solve(qp, z);
      const ControlDecision sp = exhaustive_solve(qp, z, true);
      CHECK(s.index == best_i);
      CHECK(sp.index == s.index);
      CHECK(s.u_sw == decode(best_i, N)[0]);
    }
  }
}

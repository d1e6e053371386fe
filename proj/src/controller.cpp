#include "adpmpc/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace adpmpc {

using namespace layout;

namespace {

SwitchPosition previous_input(const Vec12& x0) {
  return {static_cast<int>(std::lround(x0[kUprev])), static_cast<int>(std::lround(x0[kUprev + 1])),
          static_cast<int>(std::lround(x0[kUprev + 2]))};
}

AugmentedModel model_for(const PerUnitParams& params, const ControllerTuning& tuning) {
  return assemble_augmented(discretize(build_continuous(params), params), params, tuning);
}

}  // namespace

ControlDecision exhaustive_solve(const CondensedQP& qp, const Vec12& x0, bool parallel, double j_ub) {
  const SwitchPosition u_prev = previous_input(x0);
  const Eigen::VectorXd f = qp.f(x0);
  const Eigen::VectorXd b = qp.b_ineq(x0);
  thread_local CandidateTable table;
  if (parallel) evaluate_candidates_parallel(qp, f, b, u_prev, j_ub, table);
  else evaluate_candidates_serial(qp, f, b, u_prev, j_ub, table);
  const TableMinimum m = find_minimum(table.cost, table.feasible, j_ub);
  if (m.index < 0) throw std::logic_error("no feasible switch sequence");
  ControlDecision d;
  d.u_sw = sequence_entry(m.index, 0, qp.N);
  d.p = p_from_inputs(d.u_sw, u_prev);
  d.J_min = m.cost;
  d.candidates_evaluated = qp.candidates();
  d.feasible_count = m.feasible_count;
  d.index = m.index;
  return d;
}

DmpcQP build_dmpc(const AugmentedModel& model, int N) {
  sequence_count(N);
  DmpcQP qp;
  qp.N = N;
  const Eigen::Matrix<double, 2, kNx> ce = model.C.topRows<2>();
  const Eigen::Matrix<double, kNx, 3> bsw = model.B.leftCols<3>();
  qp.free_response = Eigen::MatrixXd::Zero(2 * N, kNx);
  qp.forced = Eigen::MatrixXd::Zero(2 * N, 3 * N);
  Mat12 ak = model.A;  // A^(k+1)
  for (int k = 0; k < N; ++k) {
    qp.free_response.block(2 * k, 0, 2, kNx) = ce * ak;
    ak = model.A * ak;
    Mat12 aj = Mat12::Identity();  // A^(k-j)
    for (int j = k; j >= 0; --j) {
      qp.forced.block(2 * k, 3 * j, 2, 3) = ce * aj * bsw;
      aj = model.A * aj;
    }
  }
  return qp;
}

ControlDecision baseline_dmpc_solve(const DmpcQP& qp, const Vec12& x0, double lambda_u) {
  if (!(lambda_u >= 0.0)) throw std::invalid_argument("lambda_u must be non-negative");
  const SwitchPosition u_prev = previous_input(x0);
  const Eigen::VectorXd e0 = qp.free_response * x0;
  const int n = sequence_count(qp.N);
  thread_local std::vector<double> cost;
  thread_local std::vector<std::uint8_t> feasible;
  cost.assign(static_cast<std::size_t>(n), kFloatCostBound);
  feasible.assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd useq(3 * qp.N);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d prev = u_prev.vec();
    double switching = 0.0;
    bool ok = true;
    for (int k = 0; k < qp.N; ++k) {
      const Eigen::Vector3d now = sequence_entry(i, k, qp.N).vec();
      const Eigen::Vector3d d = (now - prev).cwiseAbs();
      ok = ok && d.maxCoeff() <= 1.0;
      switching += d.sum();
      useq.segment<3>(3 * k) = now;
      prev = now;
    }
    if (!ok) continue;
    feasible[static_cast<std::size_t>(i)] = 1;
    cost[static_cast<std::size_t>(i)] = (e0 + qp.forced * useq).squaredNorm() + lambda_u * switching;
  }
  const TableMinimum m = find_minimum(cost, feasible, kFloatCostBound);
  if (m.index < 0) throw std::logic_error("no feasible switch sequence");
  ControlDecision d;
  d.u_sw = sequence_entry(m.index, 0, qp.N);
  d.p = p_from_inputs(d.u_sw, u_prev);
  d.J_min = m.cost;
  d.candidates_evaluated = n;
  d.feasible_count = m.feasible_count;
  d.index = m.index;
  return d;
}

Controller::Controller(const PerUnitParams& params, const ControllerTuning& tuning, ReferenceLimits limits)
    : params_(params), tuning_(tuning), limits_(limits) {
  params_.validate();
  tuning_.validate();
  const double c = std::cos(params_.That()), s = std::sin(params_.That());
  rot_ << c, -s, s, c;
  a_flt_ = filter_a(tuning_);
  b_flt_ = filter_b(tuning_, params_) / tuning_.fsw_target;
}

ControlDecision Controller::step(double t_star, const PhysState& x_ph) {
  // Oscillator: advance, then rescale if the torque reference changed.
  OscState osc = mem_.osc;
  osc.x_osc = rot_ * osc.x_osc;
  osc.phase = rot_ * osc.phase;
  if (t_star != mem_.t_star) osc = reset_oscillator(t_star, osc, limits_.max_torque, limits_.rated_amplitude);
  const Eigen::Vector2d x_sw = a_flt_ * mem_.x_sw + b_flt_ * mem_.p_prev;

  x0_.segment<4>(kPhys) = x_ph.x;
  x0_.segment<2>(kOsc) = osc.x_osc;
  x0_.segment<2>(kFlt) = x_sw;
  x0_[kConst] = 1.0;
  x0_.segment<3>(kUprev) = mem_.u_prev.vec();

  const ControlDecision d = decide(x0_);
  mem_.osc = osc;
  mem_.x_sw = x_sw;
  mem_.p_prev = d.p;
  mem_.u_prev = d.u_sw;
  mem_.t_star = t_star;
  return d;
}

AdpController::AdpController(const PerUnitParams& params, const ControllerTuning& tuning,
                             const QuadValueFunction& tail, int horizon, bool parallel, ReferenceLimits limits)
    : Controller(params, tuning, limits),
      qp_(build_condensed(model_for(params, tuning), tail, horizon)),
      parallel_(parallel) {}

ControlDecision AdpController::decide(const Vec12& x0) { return exhaustive_solve(qp_, x0, parallel_); }

DmpcController::DmpcController(const PerUnitParams& params, const ControllerTuning& tuning, double lambda_u,
                               int horizon, ReferenceLimits limits)
    : Controller(params, tuning, limits), qp_(build_dmpc(model_for(params, tuning), horizon)), lambda_u_(lambda_u) {
  if (!(lambda_u >= 0.0)) throw std::invalid_argument("lambda_u must be non-negative");
}

ControlDecision DmpcController::decide(const Vec12& x0) { return baseline_dmpc_solve(qp_, x0, lambda_u_); }

}  // namespace adpmpc

#include "adpmpc/condensed.hpp"

#include <cmath>
#include <stdexcept>

namespace adpmpc {

using namespace layout;

int sequence_count(int horizon) {
  if (horizon < 1 || horizon > kMaxHorizon) throw std::invalid_argument("horizon must be between 1 and 3");
  int n = 1;
  for (int k = 0; k < horizon; ++k) n *= 27;
  return n;
}

SwitchPosition sequence_entry(int index, int stage, int horizon) {
  int div = 1;
  for (int k = stage + 1; k < horizon; ++k) div *= 27;
  return SwitchPosition::from_index((index / div) % 27);
}

bool CondensedQP::feasible(const Eigen::VectorXd& u, const Eigen::VectorXd& b, double tol) const {
  return ((A_ineq * u - b).array() <= tol).all();
}

Eigen::VectorXd CondensedQP::sequence_input(int index, const SwitchPosition& u_prev) const {
  Eigen::VectorXd u(dim());
  Eigen::Vector3d prev = u_prev.vec();
  for (int k = 0; k < N; ++k) {
    const Eigen::Vector3d now = sequence_entry(index, k, N).vec();
    u.segment<3>(6 * k) = now;
    u.segment<3>(6 * k + 3) = (now - prev).cwiseAbs();
    prev = now;
  }
  return u;
}

CondensedQP build_condensed(const AugmentedModel& model, const QuadValueFunction& tail, int N) {
  sequence_count(N);
  if (!tail.P.allFinite() || !tail.q.allFinite() || !std::isfinite(tail.r))
    throw std::invalid_argument("tail cost is not finite");

  CondensedQP qp;
  qp.N = N;
  qp.gamma = model.tuning.gamma;
  const int nx = kNx, nu = kNu;
  const int ns = N + 1;

  qp.A_pred = Eigen::MatrixXd::Zero(ns * nx, nx);
  qp.B_pred = Eigen::MatrixXd::Zero(ns * nx, N * nu);
  Eigen::MatrixXd ak = Eigen::MatrixXd::Identity(nx, nx);
  for (int k = 0; k < ns; ++k) {
    qp.A_pred.block(k * nx, 0, nx, nx) = ak;
    ak = model.A * ak;
  }
  for (int k = 1; k < ns; ++k) {
    for (int j = 0; j < k; ++j) {
      qp.B_pred.block(k * nx, j * nu, nx, nu) = qp.A_pred.block((k - 1 - j) * nx, 0, nx, nx) * model.B;
    }
  }
  qp.A_end = qp.A_pred.bottomRows(nx);
  qp.B_end = qp.B_pred.bottomRows(nx);

  qp.H = Eigen::MatrixXd::Zero(ns * nx, ns * nx);
  const Mat12 ctc = model.C.transpose() * model.C;
  double gk = 1.0;
  for (int k = 0; k < N; ++k) {
    qp.H.block(k * nx, k * nx, nx, nx) = gk * ctc;
    gk *= qp.gamma;
  }
  const double gn = gk;  // gamma^N

  const Eigen::MatrixXd P = tail.P;
  qp.Q = qp.B_pred.transpose() * qp.H * qp.B_pred + gn * qp.B_end.transpose() * P * qp.B_end;
  qp.Q = 0.5 * (qp.Q + qp.Q.transpose()).eval();
  qp.f_x = qp.B_pred.transpose() * qp.H * qp.A_pred + gn * qp.B_end.transpose() * P * qp.A_end;
  qp.f_0 = gn * qp.B_end.transpose() * tail.q;

  // R has the (G - T) blocks for every stage, then the (-G - T) blocks.
  const int nc = 3 * N;
  qp.R = Eigen::MatrixXd::Zero(2 * nc, N * nu);
  qp.S = Eigen::MatrixXd::Zero(2 * nc, ns * nx);
  qp.F = Eigen::MatrixXd::Zero(2 * nc, N * nu);
  qp.G_stack = Eigen::MatrixXd::Zero(nc, N * nu);
  for (int k = 0; k < N; ++k) {
    qp.R.block(3 * k, k * nu, 3, nu) = model.G - model.T;
    qp.R.block(nc + 3 * k, k * nu, 3, nu) = -model.G - model.T;
    qp.S.block(3 * k, k * nx, 3, nx) = model.W;
    qp.S.block(nc + 3 * k, k * nx, 3, nx) = -model.W;
    qp.F.block(3 * k, k * nu, 3, nu) = model.T;
    qp.F.block(nc + 3 * k, k * nu, 3, nu) = -model.T;
    qp.G_stack.block(3 * k, k * nu, 3, nu) = model.G;
  }
  qp.A_ineq.resize(4 * nc, N * nu);
  qp.A_ineq << qp.R - qp.S * qp.B_pred, qp.F;
  qp.b_x = Eigen::MatrixXd::Zero(4 * nc, nx);
  qp.b_x.topRows(2 * nc) = qp.S * qp.A_pred;
  qp.b_0 = Eigen::VectorXd::Zero(4 * nc);
  qp.b_0.tail(2 * nc).setOnes();

  const int n = qp.candidates();
  SequenceTable& t = qp.table;
  t.u_static.resize(qp.dim(), n);
  t.first_index.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd u = qp.sequence_input(i, SwitchPosition{});
    u.segment<3>(3).setZero();
    t.u_static.col(i) = u;
    t.first_index[static_cast<std::size_t>(i)] = sequence_entry(i, 0, N).index();
  }
  const Eigen::MatrixXd qu = qp.Q * t.u_static;
  t.quad = t.u_static.cwiseProduct(qu).colwise().sum().transpose();
  t.cross = 2.0 * qu.middleRows<3>(3);
  t.q_p0 = qp.Q.block<3, 3>(3, 3);
  t.a_static = qp.A_ineq * t.u_static;
  t.a_p0 = qp.A_ineq.middleCols<3>(3);
  return qp;
}

double rollout_cost(const AugmentedModel& model, const QuadValueFunction& tail, const Vec12& x0,
                    const Eigen::VectorXd& u_stacked) {
  const int n = static_cast<int>(u_stacked.size()) / kNu;
  Vec12 x = x0;
  double j = 0.0, g = 1.0;
  for (int k = 0; k < n; ++k) {
    j += g * model.stage_cost(x);
    x = model.step(x, u_stacked.segment<kNu>(kNu * k));
    g *= model.tuning.gamma;
  }
  return j + g * tail(x);
}

}  // namespace adpmpc

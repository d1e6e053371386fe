#include "adpmpc/kernels.hpp"

#include <cmath>

namespace adpmpc {

namespace {

constexpr double kFeasibilityTol = 1e-9;

void resize(const CondensedQP& qp, CandidateTable& out) {
  const auto n = static_cast<std::size_t>(qp.candidates());
  out.cost.resize(n);
  out.feasible.resize(n);
}

// Per-step quantities shared by every candidate. p0 only takes 27 values, one
// per first switch position, so its terms are tabulated once per step.
struct StepData {
  const double* f = nullptr;
  Eigen::Matrix<double, 3, 27> p0;
  Eigen::Matrix<double, Eigen::Dynamic, 27> slack;  // A_ineq E p0 - b
  Eigen::Matrix<double, 1, 27> p0_cost;             // p0' Q_p0 p0 + 2 f_p0' p0
};

StepData step_data(const SequenceTable& t, const Eigen::VectorXd& f, const Eigen::VectorXd& b,
                   const SwitchPosition& u_prev) {
  StepData s;
  s.f = f.data();
  s.slack.resize(t.a_static.rows(), 27);
  const Eigen::Vector3d prev = u_prev.vec();
  for (int j = 0; j < 27; ++j) {
    const Eigen::Vector3d p0 = (SwitchPosition::from_index(j).vec() - prev).cwiseAbs();
    s.p0.col(j) = p0;
    s.slack.col(j) = t.a_p0 * p0 - b;
    s.p0_cost[j] = p0.dot(t.q_p0 * p0) + 2.0 * f.segment<3>(3).dot(p0);
  }
  return s;
}

inline void evaluate_one(const SequenceTable& t, const StepData& s, double j_ub, Eigen::Index i,
                         CandidateTable& out) {
  const auto idx = static_cast<std::size_t>(i);
  const int j = t.first_index[idx];
  const Eigen::Index rows = t.a_static.rows();
  const double* a = t.a_static.data() + i * rows;
  const double* sl = s.slack.data() + j * rows;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (a[r] + sl[r] > kFeasibilityTol) {
      out.cost[idx] = j_ub;
      out.feasible[idx] = 0;
      return;
    }
  }
  const Eigen::Index dim = t.u_static.rows();
  const double* u = t.u_static.data() + i * dim;
  double fu = 0.0;
  for (Eigen::Index k = 0; k < dim; ++k) fu += s.f[k] * u[k];
  out.cost[idx] = t.quad[i] + t.cross.col(i).dot(s.p0.col(j)) + s.p0_cost[j] + 2.0 * fu;
  out.feasible[idx] = 1;
}

}  // namespace

void evaluate_candidates_reference(const CondensedQP& qp, const Eigen::VectorXd& f, const Eigen::VectorXd& b,
                                   const SwitchPosition& u_prev, double j_ub, CandidateTable& out) {
  resize(qp, out);
  for (int i = 0; i < qp.candidates(); ++i) {
    const Eigen::VectorXd u = qp.sequence_input(i, u_prev);
    const auto idx = static_cast<std::size_t>(i);
    if (qp.feasible(u, b, kFeasibilityTol)) {
      out.cost[idx] = qp.cost(u, f);
      out.feasible[idx] = 1;
    } else {
      out.cost[idx] = j_ub;
      out.feasible[idx] = 0;
    }
  }
}

void evaluate_candidates_serial(const CondensedQP& qp, const Eigen::VectorXd& f, const Eigen::VectorXd& b,
                                const SwitchPosition& u_prev, double j_ub, CandidateTable& out) {
  resize(qp, out);
  const StepData s = step_data(qp.table, f, b, u_prev);
  const Eigen::Index n = qp.table.u_static.cols();
  for (Eigen::Index i = 0; i < n; ++i) evaluate_one(qp.table, s, j_ub, i, out);
}

void evaluate_candidates_parallel(const CondensedQP& qp, const Eigen::VectorXd& f, const Eigen::VectorXd& b,
                                  const SwitchPosition& u_prev, double j_ub, CandidateTable& out) {
  resize(qp, out);
  const StepData s = step_data(qp.table, f, b, u_prev);
  const Eigen::Index n = qp.table.u_static.cols();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) evaluate_one(qp.table, s, j_ub, i, out);
}

TableMinimum find_minimum(const std::vector<double>& cost, const std::vector<std::uint8_t>& feasible, double j_ub) {
  TableMinimum m;
  m.cost = j_ub;
  for (std::size_t i = 0; i < cost.size(); ++i) {
    if (!feasible[i]) continue;
    ++m.feasible_count;
    if (cost[i] <= m.cost) {
      m.cost = cost[i];
      m.index = static_cast<int>(i);
    }
  }
  return m;
}

}  // namespace adpmpc

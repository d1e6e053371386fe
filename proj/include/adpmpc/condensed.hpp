#pragma once

#include <vector>

#include <Eigen/Core>

#include "adpmpc/adp.hpp"
#include "adpmpc/augmentation.hpp"

namespace adpmpc {

inline constexpr int kMaxHorizon = 3;

/// Number of switch sequences over a horizon, 27^N.
int sequence_count(int horizon);

/// Switch position of stage `stage` in sequence `index`. Stage 0 is the most
/// significant base-27 digit, so the table is lexicographic in (u(0), u(1), ...).
SwitchPosition sequence_entry(int index, int stage, int horizon);

/// Static data of the candidate loop. Every sequence input splits as
/// U = U_static + E p0, where p0 = |u_sw(0) - u_prev| is the only part that
/// depends on the previous switch position (the later p entries are chained
/// inside the sequence). Quadratic and constraint terms of U_static are
/// precomputed per sequence, so a candidate costs O(N) at run time.
struct SequenceTable {
  Eigen::MatrixXd u_static;      // 6N x 27^N, p0 entries zero
  std::vector<int> first_index;  // SwitchPosition index of u_sw(0)
  Eigen::VectorXd quad;          // U_static' Q U_static
  Eigen::Matrix3Xd cross;        // 2 E' Q U_static
  Eigen::Matrix3d q_p0;          // E' Q E
  Eigen::MatrixXd a_static;      // A_ineq U_static
  Eigen::MatrixX3d a_p0;         // A_ineq E
};

/// Integer program  min U'QU + 2 f(x0)'U  s.t.  A_ineq U <= b_ineq(x0)  over the
/// stacked inputs U = [u(0); ...; u(N-1)], u = [u_sw; p]. Terms that depend on
/// x0 alone are dropped.
struct CondensedQP {
  int N = 1;
  double gamma = 0.95;

  // Prediction X = A_pred x0 + B_pred U with X = [x(0); ...; x(N)].
  Eigen::MatrixXd A_pred;
  Eigen::MatrixXd B_pred;
  Eigen::MatrixXd H;      // stage weights blkdiag(C'C, gamma C'C, ..., 0)
  Eigen::MatrixXd B_end;  // last block row of B_pred
  Eigen::MatrixXd A_end;  // A^N

  Eigen::MatrixXd Q;
  Eigen::MatrixXd f_x;  // f(x0) = f_x x0 + f_0
  Eigen::VectorXd f_0;

  // Switching constraints (R - S B) U <= S A x0 and the bound F U <= 1,
  // stacked as A_ineq U <= b_x x0 + b_0.
  Eigen::MatrixXd R;
  Eigen::MatrixXd S;
  Eigen::MatrixXd F;
  Eigen::MatrixXd A_ineq;
  Eigen::MatrixXd b_x;
  Eigen::VectorXd b_0;

  Eigen::MatrixXd G_stack;  // picks every u_sw entry out of U

  SequenceTable table;

  int dim() const { return 6 * N; }
  int candidates() const { return sequence_count(N); }

  Eigen::VectorXd f(const Vec12& x0) const { return f_x * x0 + f_0; }
  Eigen::VectorXd b_ineq(const Vec12& x0) const { return b_x * x0 + b_0; }
  double cost(const Eigen::VectorXd& u, const Eigen::VectorXd& f) const { return u.dot(Q * u) + 2.0 * f.dot(u); }
  bool feasible(const Eigen::VectorXd& u, const Eigen::VectorXd& b, double tol = 1e-9) const;

  /// Stacked input of sequence `index`, with the p entries chained from u_prev.
  Eigen::VectorXd sequence_input(int index, const SwitchPosition& u_prev) const;
};

/// Throws std::invalid_argument for N outside 1..kMaxHorizon.
CondensedQP build_condensed(const AugmentedModel& model, const QuadValueFunction& tail, int N);

/// Full objective sum_{k<N} gamma^k l(x_k) + gamma^N V(x_N) by simulation.
double rollout_cost(const AugmentedModel& model, const QuadValueFunction& tail, const Vec12& x0,
                    const Eigen::VectorXd& u_stacked);

}  // namespace adpmpc

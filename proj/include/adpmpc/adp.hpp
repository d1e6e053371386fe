#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adpmpc/augmentation.hpp"
#include "adpmpc/lmi.hpp"

namespace adpmpc {

/// V(z) = z'Pz + 2q'z + r. The constant state is carried by r alone: row and
/// column `layout::kConst` of P and the matching entry of q stay zero.
struct QuadValueFunction {
  Mat12 P = Mat12::Zero();
  Vec12 q = Vec12::Zero();
  double r = 0.0;

  double operator()(const Vec12& z) const { return z.dot(P * z) + 2.0 * q.dot(z) + r; }
};

double evaluate_tail(const QuadValueFunction& vf, const AugmentedState& x);

/// A (switch position, previous switch position) pair without a two-level jump.
struct Combo {
  SwitchPosition u_sw;
  SwitchPosition u_prev;
};

/// All 343 admissible pairs; u_sw in lexicographic order is the outer loop.
std::vector<Combo> enumerate_combos();

/// Input vector [u_sw; |u_sw - u_prev|] of a combo.
Vec6 combo_input(const Combo& m);

using Mat13 = Eigen::Matrix<double, layout::kNx + 1, layout::kNx + 1>;
using Mat9 = Eigen::Matrix<double, layout::kFree + 1, layout::kFree + 1>;

/// Homogeneous matrix [[P, q], [q', r]].
Mat13 homogeneous(const QuadValueFunction& vf);
QuadValueFunction from_homogeneous(const Mat13& s);

/// Quadratic form in [z; 1] of  l(z) + gamma V_next(Az + Bu) - V_prev(z).
Mat13 build_G_L_S(const QuadValueFunction& vf_next, const QuadValueFunction& vf_prev, const Vec6& u,
                  const AugmentedModel& model);

/// Restriction of a 13x13 form to w = [z_free; 1], with the constant state at
/// one and the previous switch position fixed by the combo.
Eigen::Matrix<double, layout::kNx + 1, layout::kFree + 1> lift_matrix(const SwitchPosition& u_prev);
Mat9 reduce_to_Mtilde(const Mat13& m_full, const Combo& m);

/// First and second moments of the state-relevance measure.
struct MeasureMoments {
  Vec12 mu = Vec12::Zero();
  Mat12 sigma = Mat12::Zero();  // covariance

  /// Operating-point mean (filter at target, constant one), identity
  /// covariance on the free states and `u_prev_variance` on u_prev.
  static MeasureMoments operating_point(double free_variance = 1.0, double u_prev_variance = 2.0 / 3.0);

  /// Second moments of the rated steady-state orbit (current on a reference
  /// of the given amplitude, rotor flux in periodic steady state, uniform
  /// angle) plus `spread` times the identity on the free states.
  static MeasureMoments steady_state_orbit(const PerUnitParams& params, double amplitude = 1.0,
                                           double spread = 0.01, double u_prev_variance = 2.0 / 3.0);
};

struct BellmanSdp {
  int iterations = 50;
  MeasureMoments moments = MeasureMoments::operating_point();
  std::vector<Combo> combos = enumerate_combos();
};

/// The iterated Bellman inequality as a congruence LMI problem. Variable i
/// holds V_i (i = 0..M-1, with V_M aliased to V_0); block (i, m) is
///   l + gamma V_{i mod M}(A z + B u_m) - V_{i-1}(z) >= 0 on w = [z_free; 1].
sdp::CongruenceLmiProblem build_bellman_problem(const BellmanSdp& sdp, const AugmentedModel& model);

/// Value functions stored in a stacked solution vector.
std::vector<QuadValueFunction> unpack_iterates(const sdp::CongruenceLmiProblem& problem, const Eigen::VectorXd& y);
Eigen::VectorXd pack_iterates(const sdp::CongruenceLmiProblem& problem, const std::vector<QuadValueFunction>& vfs);

/// Strictly feasible point: every iterate equal to -eps z'P_L z - c, where
/// P_L solves the discounted Lyapunov equation of the free-state dynamics.
std::vector<QuadValueFunction> strictly_feasible_start(const BellmanSdp& sdp, const AugmentedModel& model,
                                                       double eps = 1e-3);

struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, sdp::SolveStatus s) : std::runtime_error(what), status(s) {}
  sdp::SolveStatus status;
};

struct TrainResult {
  QuadValueFunction tail;
  std::vector<QuadValueFunction> iterates;
  double objective = 0.0;
  sdp::SolveResult solve;
};

/// Builds and solves the SDP. Throws TrainingError unless the solver reports an
/// optimal or near-optimal point.
TrainResult solve_tail_sdp(const BellmanSdp& sdp, const AugmentedModel& model, sdp::ConicSolver& solver);

/// min over admissible inputs of  l(z) + gamma V_next(Az + Bu) - V_prev(z),
/// with the admissible set taken from the previous switch position in z.
double bellman_residual(const QuadValueFunction& vf_next, const QuadValueFunction& vf_prev,
                        const AugmentedModel& model, const Vec12& z);

/// Smallest bellman_residual over every link (V_{i+1 mod M}, V_i) of the
/// iterate chain at z.
double bellman_chain_residual(const std::vector<QuadValueFunction>& iterates, const AugmentedModel& model,
                              const Vec12& z);

/// Smallest eigenvalue over all constraint blocks at the given iterates.
double min_block_eigenvalue(const BellmanSdp& sdp, const AugmentedModel& model,
                            const std::vector<QuadValueFunction>& iterates);

}  // namespace adpmpc

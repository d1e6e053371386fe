#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "adpmpc/condensed.hpp"

namespace adpmpc {

/// Sentinel cost of infeasible candidates in floating point.
inline constexpr double kFloatCostBound = std::numeric_limits<double>::max();

/// Loop 1 output: one cost per switch sequence, J_ub where infeasible.
struct CandidateTable {
  std::vector<double> cost;
  std::vector<std::uint8_t> feasible;
};

/// Direct evaluation of U'QU + 2f'U and A_ineq U <= b for every sequence,
/// kept as the oracle for the table-driven kernels.
void evaluate_candidates_reference(const CondensedQP& qp, const Eigen::VectorXd& f, const Eigen::VectorXd& b,
                                   const SwitchPosition& u_prev, double j_ub, CandidateTable& out);

/// Candidate loop over the precomputed sequence table.
void evaluate_candidates_serial(const CondensedQP& qp, const Eigen::VectorXd& f, const Eigen::VectorXd& b,
                                const SwitchPosition& u_prev, double j_ub, CandidateTable& out);

/// OpenMP version; fills the table bit-identically to the serial kernel.
void evaluate_candidates_parallel(const CondensedQP& qp, const Eigen::VectorXd& f, const Eigen::VectorXd& b,
                                  const SwitchPosition& u_prev, double j_ub, CandidateTable& out);

struct TableMinimum {
  int index = -1;
  double cost = 0.0;
  int feasible_count = 0;
};

/// Loop 2: sequential fold with "J <= J_min", so the last of several equal
/// minima wins. Infeasible entries are skipped by flag rather than by value.
TableMinimum find_minimum(const std::vector<double>& cost, const std::vector<std::uint8_t>& feasible, double j_ub);

}  // namespace adpmpc

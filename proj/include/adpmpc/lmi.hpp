#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace adpmpc::sdp {

/// A symmetric matrix unknown. Only the listed (row <= col) entries are
/// decision variables; every other entry is fixed at zero.
struct MatrixVariable {
  int dim = 0;
  std::vector<std::pair<int, int>> free;
};

/// One congruence term `scale * U^T Y U` of a block, where Y is a matrix
/// variable and U a (var.dim x block dim) factor from the problem's pool.
struct CongruenceTerm {
  int variable = 0;
  int factor = 0;
  double scale = 1.0;
};

/// Z_b(y) = C_b + sum_t scale_t U_t^T Y_t U_t  must be positive semidefinite.
struct LmiBlock {
  int constant = 0;
  std::vector<CongruenceTerm> terms;
};

/// Linear matrix inequalities in "congruence form":
///
///   maximize    objective^T y
///   subject to  Z_b(y) >= 0  for every block b,
///
/// with y the stacked free entries of all matrix variables. This is the dual
/// of the equality-constrained standard form
///   minimize sum_b <C_b, X_b>  s.t.  sum_b <F_{a,b}, X_b> = -objective_a,  X_b >= 0.
struct CongruenceLmiProblem {
  std::vector<MatrixVariable> variables;
  std::vector<Eigen::MatrixXd> factors;
  std::vector<Eigen::MatrixXd> constants;
  std::vector<LmiBlock> blocks;
  Eigen::VectorXd objective;

  int num_scalars() const;
  int offset(int variable) const;
  int block_dim(int block) const { return static_cast<int>(constants[blocks[block].constant].rows()); }

  /// Symmetric matrix of variable `v` assembled from the stacked vector.
  Eigen::MatrixXd assemble(int v, const Eigen::VectorXd& y) const;
  /// Slack matrix Z_b(y).
  Eigen::MatrixXd slack(int block, const Eigen::VectorXd& y) const;
  /// Throws std::invalid_argument on inconsistent indices or dimensions.
  void validate() const;
};

/// Writes the problem in SDPA sparse format so an external PSD solver can be
/// used. The SDPA primal variable is y, with objective -objective (SDPA minimizes).
void write_sdpa(const CongruenceLmiProblem& problem, std::ostream& os);

/// NearOptimal: progress stalled with a strictly feasible dual iterate, a
/// relative gap below 100x tolerance and a primal residual below its square
/// root.
enum class SolveStatus { Optimal, NearOptimal, Unbounded, MaxIterations, NumericalFailure };

std::string to_string(SolveStatus status);

struct SolverOptions {
  double tolerance = 1e-8;
  int max_iterations = 120;
  bool parallel = true;
  bool verbose = false;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd y;
  double primal_objective = 0.0;  // standard-form (min) objective
  double dual_objective = 0.0;    // objective^T y
  double primal_infeasibility = 0.0;
  double min_slack_eigenvalue = 0.0;
  int iterations = 0;
};

/// Interface for PSD-capable solvers. `y_start` must be strictly feasible.
class ConicSolver {
 public:
  virtual ~ConicSolver() = default;
  virtual SolveResult solve(const CongruenceLmiProblem& problem, const Eigen::VectorXd& y_start) = 0;
};

/// Primal-dual path-following method (HKM search direction, Mehrotra
/// predictor-corrector). The iterates stay strictly feasible for the LMIs, so
/// any returned y satisfies Z_b(y) > 0 for every block.
class InteriorPointSolver final : public ConicSolver {
 public:
  explicit InteriorPointSolver(SolverOptions options = {}) : options_(options) {}
  SolveResult solve(const CongruenceLmiProblem& problem, const Eigen::VectorXd& y_start) override;

 private:
  SolverOptions options_;
};

/// Schur complement of the Newton system, H_ac = sum_b tr(F_a X_b F_c Z_b^{-1}),
/// stored as dense tiles indexed by pairs of matrix variables that share a block.
struct SchurTiles {
  std::vector<int> offsets;                 // per variable, into the stacked vector
  std::vector<int> sizes;                   // free entries per variable
  std::vector<std::pair<int, int>> pairs;   // (v, w) with v <= w
  std::vector<Eigen::MatrixXd> tiles;       // tile(v, w) has sizes[v] x sizes[w]

  static SchurTiles layout_for(const CongruenceLmiProblem& problem);
  int find(int v, int w) const;
  void set_zero();
  Eigen::MatrixXd dense() const;
  Eigen::SparseMatrix<double> lower() const;
};

/// Serial reference kernel; the parallel one must agree with it to rounding.
void schur_complement_serial(const CongruenceLmiProblem& problem, const std::vector<Eigen::MatrixXd>& x,
                             const std::vector<Eigen::MatrixXd>& z_inv, SchurTiles& out);
void schur_complement_parallel(const CongruenceLmiProblem& problem, const std::vector<Eigen::MatrixXd>& x,
                               const std::vector<Eigen::MatrixXd>& z_inv, SchurTiles& out);

/// Adjoint action: out_a = sum_b <F_{a,b}, W_b>.
Eigen::VectorXd apply_adjoint(const CongruenceLmiProblem& problem, const std::vector<Eigen::MatrixXd>& w,
                              bool parallel);

}  // namespace adpmpc::sdp

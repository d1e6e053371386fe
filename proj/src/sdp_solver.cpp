#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "adpmpc/lmi.hpp"

namespace adpmpc::sdp {
namespace {

using Blocks = std::vector<Eigen::MatrixXd>;

Blocks slacks(const CongruenceLmiProblem& p, const Eigen::VectorXd& y, bool with_constant, bool parallel) {
  std::vector<Eigen::MatrixXd> vars(p.variables.size());
  for (std::size_t v = 0; v < vars.size(); ++v) vars[v] = p.assemble(static_cast<int>(v), y);
  const int nb = static_cast<int>(p.blocks.size());
  Blocks z(static_cast<std::size_t>(nb));
  auto one = [&](int b) {
    const auto& blk = p.blocks[b];
    Eigen::MatrixXd m = with_constant ? p.constants[blk.constant]
                                      : Eigen::MatrixXd::Zero(p.block_dim(b), p.block_dim(b));
    for (const auto& t : blk.terms) {
      const auto& u = p.factors[t.factor];
      m.noalias() += t.scale * (u.transpose() * vars[t.variable] * u);
    }
    z[static_cast<std::size_t>(b)] = 0.5 * (m + m.transpose());
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nb; ++b) one(b);
  } else {
    for (int b = 0; b < nb; ++b) one(b);
  }
  return z;
}

// Largest alpha with M + alpha dM >= 0, given the Cholesky factor of M.
double max_step(const Eigen::MatrixXd& chol_l, const Eigen::MatrixXd& dm) {
  const auto l = chol_l.triangularView<Eigen::Lower>();
  Eigen::MatrixXd s = l.solve(dm);
  s = l.solve(s.transpose()).eval();
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double inner(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i]).sum();
  return s;
}

bool cholesky_all(const Blocks& m, Blocks& factors) {
  factors.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    Eigen::LLT<Eigen::MatrixXd> llt(m[i]);
    if (llt.info() != Eigen::Success) return false;
    factors[i] = llt.matrixL();
  }
  return true;
}

double min_step(const Blocks& chol, const Blocks& d, bool parallel) {
  const int n = static_cast<int>(d.size());
  std::vector<double> steps(static_cast<std::size_t>(n));
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) steps[static_cast<std::size_t>(i)] = max_step(chol[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(i)]);
  } else {
    for (int i = 0; i < n; ++i) steps[static_cast<std::size_t>(i)] = max_step(chol[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(i)]);
  }
  return *std::min_element(steps.begin(), steps.end());
}

class NewtonSystem {
 public:
  explicit NewtonSystem(int n) : n_(n) {}

  bool factor(const SchurTiles& tiles) {
    if (n_ <= 1200) {
      dense_ = tiles.dense();
      return factor_dense();
    }
    sparse_ = tiles.lower();
    return factor_sparse();
  }

  // Solve with two rounds of iterative refinement against the unregularized
  // matrix; the Schur complement gets badly conditioned near the optimum.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = raw_solve(rhs);
    for (int it = 0; it < 2; ++it) x += raw_solve(rhs - multiply(x));
    return x;
  }

 private:
  Eigen::VectorXd raw_solve(const Eigen::VectorXd& rhs) const {
    if (n_ <= 1200) return dense_llt_.solve(rhs);
    return sparse_llt_.solve(rhs);
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    if (n_ <= 1200) return dense_ * x;
    return sparse_.selfadjointView<Eigen::Lower>() * x;
  }

  bool factor_dense() {
    const double scale = std::max(dense_.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (double reg = 0.0; reg < 1e-6; reg = reg == 0.0 ? 1e-14 : reg * 100.0) {
      Eigen::MatrixXd h = dense_;
      h.diagonal().array() += reg * scale;
      dense_llt_.compute(h);
      if (dense_llt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  bool factor_sparse() {
    Eigen::VectorXd diag = sparse_.diagonal();
    const double scale = std::max(diag.cwiseAbs().maxCoeff(), 1e-300);
    if (!analyzed_) {
      sparse_llt_.analyzePattern(sparse_);
      analyzed_ = true;
    }
    for (double reg = 0.0; reg < 1e-6; reg = reg == 0.0 ? 1e-14 : reg * 100.0) {
      Eigen::SparseMatrix<double> h = sparse_;
      for (int i = 0; i < n_; ++i) h.coeffRef(i, i) += reg * scale;
      sparse_llt_.factorize(h);
      if (sparse_llt_.info() == Eigen::Success) return true;
    }
    return false;
  }

  int n_;
  Eigen::MatrixXd dense_;
  Eigen::LLT<Eigen::MatrixXd> dense_llt_;
  Eigen::SparseMatrix<double> sparse_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> sparse_llt_;
  bool analyzed_ = false;
};

Blocks hkm_direction(const Blocks& x, const Blocks& z_inv, const Blocks& dz, double sigma_mu, const Blocks* corr) {
  Blocks dx(x.size());
  for (std::size_t b = 0; b < x.size(); ++b) {
    Eigen::MatrixXd d = sigma_mu * z_inv[b] - x[b] - x[b] * dz[b] * z_inv[b];
    if (corr) d -= (*corr)[b];
    dx[b] = 0.5 * (d + d.transpose());
  }
  return dx;
}

}  // namespace

SolveResult InteriorPointSolver::solve(const CongruenceLmiProblem& problem, const Eigen::VectorXd& y_start) {
  problem.validate();
  const int n = problem.num_scalars();
  if (y_start.size() != n) throw std::invalid_argument("starting point has the wrong length");
  const bool par = options_.parallel;
  const Eigen::VectorXd& b = problem.objective;
  const int nb = static_cast<int>(problem.blocks.size());

  SolveResult result;
  Eigen::VectorXd y = y_start;
  Blocks z = slacks(problem, y, true, par);
  Blocks lz;
  if (!cholesky_all(z, lz)) throw std::invalid_argument("starting point is not strictly feasible");

  double dim_total = 0.0;
  for (int i = 0; i < nb; ++i) dim_total += problem.block_dim(i);

  Blocks x(static_cast<std::size_t>(nb));
  {
    const double xi = std::max(10.0, std::sqrt(double(problem.block_dim(0))) * std::max(1.0, b.cwiseAbs().maxCoeff()));
    for (int i = 0; i < nb; ++i) x[i] = xi * Eigen::MatrixXd::Identity(problem.block_dim(i), problem.block_dim(i));
  }

  SchurTiles tiles = SchurTiles::layout_for(problem);
  NewtonSystem newton(n);
  const double bnorm = 1.0 + b.norm();

  double last_gap = std::numeric_limits<double>::infinity();
  double last_pinf = std::numeric_limits<double>::infinity();
  auto finish = [&](SolveStatus st, int iter) {
    if ((st == SolveStatus::NumericalFailure || st == SolveStatus::MaxIterations) &&
        last_gap < 100.0 * options_.tolerance && last_pinf < std::sqrt(options_.tolerance))
      st = SolveStatus::NearOptimal;
    result.status = st;
    result.iterations = iter;
    result.y = y;
    result.dual_objective = b.dot(y);
    double pobj = 0.0;
    for (int i = 0; i < nb; ++i) pobj += problem.constants[problem.blocks[i].constant].cwiseProduct(x[i]).sum();
    result.primal_objective = pobj;
    result.primal_infeasibility = (apply_adjoint(problem, x, par) + b).norm() / bnorm;
    double lmin = std::numeric_limits<double>::infinity();
    for (const auto& zi : z) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(zi, Eigen::EigenvaluesOnly);
      lmin = std::min(lmin, es.eigenvalues()(0));
    }
    result.min_slack_eigenvalue = lmin;
    return result;
  };

  int stalled = 0;
  for (int iter = 0; iter < options_.max_iterations; ++iter) {
    Blocks z_inv(static_cast<std::size_t>(nb));
    for (int i = 0; i < nb; ++i) {
      const auto l = lz[i].triangularView<Eigen::Lower>();
      Eigen::MatrixXd li = l.solve(Eigen::MatrixXd::Identity(lz[i].rows(), lz[i].cols()));
      z_inv[i] = li.transpose() * li;
    }
    const double gap = inner(x, z);
    const double mu = gap / dim_total;
    const double dobj = b.dot(y);
    const double pinf = (apply_adjoint(problem, x, par) + b).norm() / bnorm;
    const double rel_gap = gap / (1.0 + std::abs(dobj));
    last_gap = rel_gap;
    last_pinf = pinf;
    if (options_.verbose) {
      std::fprintf(stderr, "ipm %3d  dobj % .10e  gap %.3e  pinf %.3e  mu %.3e\n", iter, dobj, rel_gap, pinf, mu);
    }
    if (rel_gap < options_.tolerance && pinf < options_.tolerance) return finish(SolveStatus::Optimal, iter);
    if (!std::isfinite(dobj) || std::abs(dobj) > 1e12 || y.cwiseAbs().maxCoeff() > 1e12)
      return finish(SolveStatus::Unbounded, iter);

    if (par) schur_complement_parallel(problem, x, z_inv, tiles);
    else schur_complement_serial(problem, x, z_inv, tiles);
    if (!newton.factor(tiles)) return finish(SolveStatus::NumericalFailure, iter);

    Blocks lx;
    if (!cholesky_all(x, lx)) return finish(SolveStatus::NumericalFailure, iter);

    // Predictor.
    const Eigen::VectorXd dy_aff = newton.solve(b);
    const Blocks dz_aff = slacks(problem, dy_aff, false, par);
    const Blocks dx_aff = hkm_direction(x, z_inv, dz_aff, 0.0, nullptr);
    const double ap_aff = std::min(1.0, min_step(lx, dx_aff, par));
    const double ad_aff = std::min(1.0, min_step(lz, dz_aff, par));
    double mu_aff = 0.0;
    for (int i = 0; i < nb; ++i)
      mu_aff += ((x[i] + ap_aff * dx_aff[i]).cwiseProduct(z[i] + ad_aff * dz_aff[i])).sum();
    mu_aff /= dim_total;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector.
    Blocks corr(static_cast<std::size_t>(nb));
    for (int i = 0; i < nb; ++i) corr[i] = dx_aff[i] * dz_aff[i] * z_inv[i];
    const Eigen::VectorXd rhs = b + sigma * mu * apply_adjoint(problem, z_inv, par) - apply_adjoint(problem, corr, par);
    const Eigen::VectorXd dy = newton.solve(rhs);
    const Blocks dz = slacks(problem, dy, false, par);
    const Blocks dx = hkm_direction(x, z_inv, dz, sigma * mu, &corr);

    const double tau = std::max(0.9, 1.0 - 5.0 * mu / std::max(1e-300, std::abs(dobj) + 1.0));
    const double ap = std::min(1.0, std::min(0.99, tau) * min_step(lx, dx, par));
    double ad = std::min(1.0, std::min(0.99, tau) * min_step(lz, dz, par));

    if (options_.verbose) std::fprintf(stderr, "      sigma %.2e  step primal %.3e  dual %.3e\n", sigma, ap, ad);
    for (int i = 0; i < nb; ++i) x[i] = x[i] + ap * dx[i];

    // Recompute the slack from y so the LMIs hold exactly, backing off if
    // rounding puts a block on the boundary.
    Eigen::VectorXd y_new;
    Blocks z_new, lz_new;
    bool accepted = false;
    for (int tries = 0; tries < 30; ++tries) {
      y_new = y + ad * dy;
      z_new = slacks(problem, y_new, true, par);
      if (cholesky_all(z_new, lz_new)) {
        accepted = true;
        break;
      }
      ad *= 0.5;
    }
    if (!accepted) return finish(SolveStatus::NumericalFailure, iter);
    y = std::move(y_new);
    z = std::move(z_new);
    lz = std::move(lz_new);

    stalled = (ap < 1e-8 && ad < 1e-8) ? stalled + 1 : 0;
    if (stalled >= 3) return finish(SolveStatus::NumericalFailure, iter);
  }
  return finish(SolveStatus::MaxIterations, options_.max_iterations);
}

}  // namespace adpmpc::sdp

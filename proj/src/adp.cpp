#include "adpmpc/adp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace adpmpc {

using namespace layout;

namespace {

constexpr int kH = kNx;  // homogeneous coordinate of the 13x13 forms

// Entries of S that are decision variables: everything except the constant
// state, whose role is taken by the homogeneous coordinate.
std::vector<int> free_coordinates() {
  std::vector<int> idx;
  for (int j = 0; j <= kH; ++j)
    if (j != kConst) idx.push_back(j);
  return idx;
}

sdp::MatrixVariable value_variable() {
  sdp::MatrixVariable v;
  v.dim = kNx + 1;
  const auto idx = free_coordinates();
  for (std::size_t b = 0; b < idx.size(); ++b)
    for (std::size_t a = 0; a <= b; ++a) v.free.emplace_back(idx[a], idx[b]);
  return v;
}

Mat13 stage_form(const AugmentedModel& model) {
  Mat13 l = Mat13::Zero();
  l.topLeftCorner<kNx, kNx>() = model.C.transpose() * model.C;
  return l;
}

Mat13 transition(const AugmentedModel& model, const Vec6& u) {
  Mat13 a = Mat13::Zero();
  a.topLeftCorner<kNx, kNx>() = model.A;
  a.block<kNx, 1>(0, kH) = model.B * u;
  a(kH, kH) = 1.0;
  return a;
}

}  // namespace

double evaluate_tail(const QuadValueFunction& vf, const AugmentedState& x) { return vf(x.vec()); }

std::vector<Combo> enumerate_combos() {
  std::vector<Combo> out;
  out.reserve(343);
  for (int a = 0; a < 27; ++a) {
    const auto u = SwitchPosition::from_index(a);
    for (int b = 0; b < 27; ++b) {
      const auto v = SwitchPosition::from_index(b);
      bool ok = true;
      for (int ph = 0; ph < 3; ++ph) ok = ok && std::abs(u[ph] - v[ph]) <= 1;
      if (ok) out.push_back({u, v});
    }
  }
  return out;
}

Vec6 combo_input(const Combo& m) { return make_input(m.u_sw, p_from_inputs(m.u_sw, m.u_prev)); }

Mat13 homogeneous(const QuadValueFunction& vf) {
  Mat13 s;
  s.topLeftCorner<kNx, kNx>() = vf.P;
  s.block<kNx, 1>(0, kH) = vf.q;
  s.block<1, kNx>(kH, 0) = vf.q.transpose();
  s(kH, kH) = vf.r;
  return s;
}

QuadValueFunction from_homogeneous(const Mat13& s) {
  QuadValueFunction vf;
  vf.P = 0.5 * (s.topLeftCorner<kNx, kNx>() + s.topLeftCorner<kNx, kNx>().transpose());
  vf.q = 0.5 * (s.block<kNx, 1>(0, kH) + s.block<1, kNx>(kH, 0).transpose());
  vf.r = s(kH, kH);
  return vf;
}

Mat13 build_G_L_S(const QuadValueFunction& vf_next, const QuadValueFunction& vf_prev, const Vec6& u,
                  const AugmentedModel& model) {
  const Mat13 a = transition(model, u);
  Mat13 m = stage_form(model) + model.tuning.gamma * (a.transpose() * homogeneous(vf_next) * a) - homogeneous(vf_prev);
  return 0.5 * (m + m.transpose());
}

Eigen::Matrix<double, kNx + 1, kFree + 1> lift_matrix(const SwitchPosition& u_prev) {
  Eigen::Matrix<double, kNx + 1, kFree + 1> r = Eigen::Matrix<double, kNx + 1, kFree + 1>::Zero();
  r.topLeftCorner<kFree, kFree>().setIdentity();
  r(kConst, kFree) = 1.0;
  r.block<3, 1>(kUprev, kFree) = u_prev.vec();
  r(kH, kFree) = 1.0;
  return r;
}

Mat9 reduce_to_Mtilde(const Mat13& m_full, const Combo& m) {
  const auto r = lift_matrix(m.u_prev);
  Mat9 out = r.transpose() * m_full * r;
  return 0.5 * (out + out.transpose());
}

MeasureMoments MeasureMoments::operating_point(double free_variance, double u_prev_variance) {
  if (!(free_variance >= 0.0) || !(u_prev_variance >= 0.0)) throw std::invalid_argument("variances must be non-negative");
  MeasureMoments mm;
  mm.mu[kFlt] = 1.0;
  mm.mu[kFlt + 1] = 1.0;
  mm.mu[kConst] = 1.0;
  for (int j = 0; j < kFree; ++j) mm.sigma(j, j) = free_variance;
  for (int j = kUprev; j < kUprev + 3; ++j) mm.sigma(j, j) = u_prev_variance;
  return mm;
}

MeasureMoments MeasureMoments::steady_state_orbit(const PerUnitParams& params, double amplitude, double spread,
                                                  double u_prev_variance) {
  if (!(amplitude >= 0.0) || !(spread >= 0.0)) throw std::invalid_argument("amplitude and spread must be non-negative");
  MeasureMoments mm = operating_point(spread, u_prev_variance);
  // The orbit is a sum of phasors, so its second moment is exact with any
  // uniform grid of more than two angles.
  constexpr int kAngles = 8;
  for (int a = 0; a < kAngles; ++a) {
    const double th = 2.0 * std::numbers::pi * a / kAngles;
    Eigen::Matrix<double, 6, 1> z;
    z << steady_state(params, amplitude, th).x, amplitude * std::sin(th), -amplitude * std::cos(th);
    mm.sigma.topLeftCorner<6, 6>() += z * z.transpose() / kAngles;
  }
  return mm;
}

sdp::CongruenceLmiProblem build_bellman_problem(const BellmanSdp& sdp, const AugmentedModel& model) {
  if (sdp.iterations < 1) throw std::invalid_argument("at least one Bellman iteration is required");
  if (sdp.combos.empty()) throw std::invalid_argument("no input combinations");
  Eigen::SelfAdjointEigenSolver<Mat12> es(sdp.moments.sigma, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -1e-12 || !sdp.moments.sigma.isApprox(sdp.moments.sigma.transpose()))
    throw std::invalid_argument("measure covariance must be symmetric positive semidefinite");

  const int n_iter = sdp.iterations;
  const int n_combo = static_cast<int>(sdp.combos.size());
  const double gamma = model.tuning.gamma;
  const Mat13 l = stage_form(model);

  sdp::CongruenceLmiProblem p;
  p.variables.assign(static_cast<std::size_t>(n_iter), value_variable());
  p.factors.reserve(2 * static_cast<std::size_t>(n_combo));
  p.constants.reserve(static_cast<std::size_t>(n_combo));
  for (const auto& m : sdp.combos) {
    const Eigen::MatrixXd r = lift_matrix(m.u_prev);
    p.factors.push_back(r);
    p.factors.push_back(transition(model, combo_input(m)) * r);
    Eigen::MatrixXd c = r.transpose() * l * r;
    p.constants.push_back(0.5 * (c + c.transpose()));
  }
  p.blocks.reserve(static_cast<std::size_t>(n_iter * n_combo));
  for (int i = 1; i <= n_iter; ++i) {
    for (int c = 0; c < n_combo; ++c) {
      sdp::LmiBlock blk;
      blk.constant = c;
      blk.terms = {{i % n_iter, 2 * c + 1, gamma}, {i - 1, 2 * c, -1.0}};
      p.blocks.push_back(std::move(blk));
    }
  }

  // E[V_0] = <S_0, Omega> with Omega the second-moment matrix of [z; 1].
  Mat13 omega;
  omega.topLeftCorner<kNx, kNx>() = sdp.moments.sigma + sdp.moments.mu * sdp.moments.mu.transpose();
  omega.block<kNx, 1>(0, kH) = sdp.moments.mu;
  omega.block<1, kNx>(kH, 0) = sdp.moments.mu.transpose();
  omega(kH, kH) = 1.0;
  p.objective = Eigen::VectorXd::Zero(p.num_scalars());
  const auto& free = p.variables[0].free;
  for (std::size_t a = 0; a < free.size(); ++a) {
    const auto [j, k] = free[a];
    p.objective[static_cast<int>(a)] = (j == k ? 1.0 : 2.0) * omega(j, k);
  }
  return p;
}

std::vector<QuadValueFunction> unpack_iterates(const sdp::CongruenceLmiProblem& problem, const Eigen::VectorXd& y) {
  std::vector<QuadValueFunction> out;
  out.reserve(problem.variables.size());
  for (std::size_t v = 0; v < problem.variables.size(); ++v)
    out.push_back(from_homogeneous(problem.assemble(static_cast<int>(v), y)));
  return out;
}

Eigen::VectorXd pack_iterates(const sdp::CongruenceLmiProblem& problem, const std::vector<QuadValueFunction>& vfs) {
  if (vfs.size() != problem.variables.size()) throw std::invalid_argument("iterate count does not match the problem");
  Eigen::VectorXd y(problem.num_scalars());
  int a = 0;
  for (std::size_t v = 0; v < vfs.size(); ++v) {
    const Mat13 s = homogeneous(vfs[v]);
    for (const auto& [j, k] : problem.variables[v].free) y[a++] = s(j, k);
  }
  return y;
}

std::vector<QuadValueFunction> strictly_feasible_start(const BellmanSdp& sdp, const AugmentedModel& model,
                                                       double eps) {
  const double gamma = model.tuning.gamma;
  const Eigen::Matrix<double, kFree, kFree> a = model.A.topLeftCorner<kFree, kFree>();
  // P_L - gamma A' P_L A = I via the Kronecker form.
  constexpr int n2 = kFree * kFree;
  const Eigen::MatrixXd at = a.transpose();
  Eigen::MatrixXd kron(n2, n2);
  for (int i = 0; i < kFree; ++i)
    for (int j = 0; j < kFree; ++j) kron.block<kFree, kFree>(i * kFree, j * kFree) = at(i, j) * at;
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n2, n2) - gamma * kron;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(kFree, kFree);
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(eye.data(), n2);
  const Eigen::VectorXd sol = lhs.partialPivLu().solve(rhs);
  Eigen::Matrix<double, kFree, kFree> pl = Eigen::Map<const Eigen::MatrixXd>(sol.data(), kFree, kFree);
  pl = 0.5 * (pl + pl.transpose()).eval();

  QuadValueFunction v;
  v.P.topLeftCorner<kFree, kFree>() = -eps * pl;

  // Pick the constant so the worst block is comfortably positive definite;
  // -V_prev + gamma V_next adds (1 - gamma) c to the homogeneous corner.
  double need = 0.0;
  for (const auto& m : sdp.combos) {
    const Mat9 mt = reduce_to_Mtilde(build_G_L_S(v, v, combo_input(m), model), m);
    const Eigen::Matrix<double, kFree, kFree> h = mt.topLeftCorner<kFree, kFree>();
    Eigen::LLT<Eigen::Matrix<double, kFree, kFree>> llt(h);
    if (llt.info() != Eigen::Success) throw std::runtime_error("free-state block of the starting point is not positive definite");
    const Eigen::Matrix<double, kFree, 1> lin = mt.block<kFree, 1>(0, kFree);
    need = std::max(need, lin.dot(llt.solve(lin)) - mt(kFree, kFree));
  }
  v.r = -(need + 1.0 + 0.1 * std::abs(need)) / (1.0 - gamma);
  return std::vector<QuadValueFunction>(static_cast<std::size_t>(sdp.iterations), v);
}

TrainResult solve_tail_sdp(const BellmanSdp& sdp, const AugmentedModel& model, sdp::ConicSolver& solver) {
  const auto problem = build_bellman_problem(sdp, model);
  const Eigen::VectorXd y0 = pack_iterates(problem, strictly_feasible_start(sdp, model));
  TrainResult out;
  out.solve = solver.solve(problem, y0);
  if (out.solve.status != sdp::SolveStatus::Optimal && out.solve.status != sdp::SolveStatus::NearOptimal) {
    throw TrainingError("tail-cost SDP did not solve: " + sdp::to_string(out.solve.status), out.solve.status);
  }
  out.iterates = unpack_iterates(problem, out.solve.y);
  out.tail = out.iterates.front();
  out.objective = out.solve.dual_objective;
  return out;
}

double bellman_residual(const QuadValueFunction& vf_next, const QuadValueFunction& vf_prev,
                        const AugmentedModel& model, const Vec12& z) {
  const SwitchPosition u_prev(static_cast<int>(std::lround(z[kUprev])), static_cast<int>(std::lround(z[kUprev + 1])),
                              static_cast<int>(std::lround(z[kUprev + 2])));
  const double base = model.stage_cost(z) - vf_prev(z);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& fi : feasible_inputs(u_prev)) {
    const Vec12 zn = model.step(z, make_input(fi.u_sw, fi.p));
    best = std::min(best, base + model.tuning.gamma * vf_next(zn));
  }
  return best;
}

double bellman_chain_residual(const std::vector<QuadValueFunction>& iterates, const AugmentedModel& model,
                              const Vec12& z) {
  const std::size_t n = iterates.size();
  if (n == 0) throw std::invalid_argument("empty iterate chain");
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) worst = std::min(worst, bellman_residual(iterates[(i + 1) % n], iterates[i], model, z));
  return worst;
}

double min_block_eigenvalue(const BellmanSdp& sdp, const AugmentedModel& model,
                            const std::vector<QuadValueFunction>& iterates) {
  const int n_iter = static_cast<int>(iterates.size());
  if (n_iter != sdp.iterations) throw std::invalid_argument("iterate count does not match the problem");
  double lmin = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= n_iter; ++i) {
    for (const auto& m : sdp.combos) {
      const Mat9 mt = reduce_to_Mtilde(
          build_G_L_S(iterates[static_cast<std::size_t>(i % n_iter)], iterates[static_cast<std::size_t>(i - 1)],
                      combo_input(m), model),
          m);
      Eigen::SelfAdjointEigenSolver<Mat9> es(mt, Eigen::EigenvaluesOnly);
      lmin = std::min(lmin, es.eigenvalues()(0));
    }
  }
  return lmin;
}

}  // namespace adpmpc

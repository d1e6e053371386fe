#include "adpmpc/lmi.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace adpmpc::sdp {

int CongruenceLmiProblem::num_scalars() const {
  int n = 0;
  for (const auto& v : variables) n += static_cast<int>(v.free.size());
  return n;
}

int CongruenceLmiProblem::offset(int variable) const {
  int n = 0;
  for (int v = 0; v < variable; ++v) n += static_cast<int>(variables[v].free.size());
  return n;
}

Eigen::MatrixXd CongruenceLmiProblem::assemble(int v, const Eigen::VectorXd& y) const {
  const auto& var = variables[v];
  const int off = offset(v);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(var.dim, var.dim);
  for (std::size_t a = 0; a < var.free.size(); ++a) {
    const auto [j, k] = var.free[a];
    m(j, k) = y[off + static_cast<int>(a)];
    m(k, j) = m(j, k);
  }
  return m;
}

Eigen::MatrixXd CongruenceLmiProblem::slack(int block, const Eigen::VectorXd& y) const {
  const auto& blk = blocks[block];
  Eigen::MatrixXd z = constants[blk.constant];
  for (const auto& t : blk.terms) {
    const auto& u = factors[t.factor];
    z.noalias() += t.scale * (u.transpose() * assemble(t.variable, y) * u);
  }
  return z;
}

void CongruenceLmiProblem::validate() const {
  const int n = num_scalars();
  if (objective.size() != n) throw std::invalid_argument("objective length does not match the free entries");
  for (const auto& var : variables) {
    for (const auto& [j, k] : var.free) {
      if (j < 0 || k < j || k >= var.dim) throw std::invalid_argument("free entry out of range");
    }
  }
  for (const auto& blk : blocks) {
    if (blk.constant < 0 || blk.constant >= static_cast<int>(constants.size()))
      throw std::invalid_argument("block constant index out of range");
    const auto& c = constants[blk.constant];
    if (c.rows() != c.cols()) throw std::invalid_argument("block constant must be square");
    for (const auto& t : blk.terms) {
      if (t.variable < 0 || t.variable >= static_cast<int>(variables.size()) || t.factor < 0 ||
          t.factor >= static_cast<int>(factors.size()))
        throw std::invalid_argument("term index out of range");
      const auto& u = factors[t.factor];
      if (u.rows() != variables[t.variable].dim || u.cols() != c.rows())
        throw std::invalid_argument("factor dimensions do not match variable and block");
    }
  }
}

void write_sdpa(const CongruenceLmiProblem& problem, std::ostream& os) {
  problem.validate();
  const int n = problem.num_scalars();
  os << "* congruence LMI problem exported in SDPA sparse format\n";
  os << n << "\n" << problem.blocks.size() << "\n";
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) os << problem.block_dim(static_cast<int>(b)) << ' ';
  os << "\n";
  os.precision(17);
  for (int a = 0; a < n; ++a) os << -problem.objective[a] << (a + 1 < n ? ' ' : '\n');

  auto emit = [&os](int mat, int blk, const Eigen::MatrixXd& m) {
    for (int j = 0; j < m.cols(); ++j)
      for (int i = 0; i <= j; ++i)
        if (m(i, j) != 0.0) os << mat << ' ' << blk + 1 << ' ' << i + 1 << ' ' << j + 1 << ' ' << m(i, j) << '\n';
  };
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const auto& blk = problem.blocks[b];
    // SDPA: sum_i F_i x_i - F_0 >= 0, so F_0 = -C.
    emit(0, static_cast<int>(b), -problem.constants[blk.constant]);
    std::map<int, Eigen::MatrixXd> per_scalar;
    for (const auto& t : blk.terms) {
      const auto& var = problem.variables[t.variable];
      const auto& u = problem.factors[t.factor];
      const int off = problem.offset(t.variable);
      for (std::size_t a = 0; a < var.free.size(); ++a) {
        const auto [j, k] = var.free[a];
        Eigen::MatrixXd f = u.row(j).transpose() * u.row(k);
        if (j != k) f += f.transpose().eval();
        auto [it, inserted] = per_scalar.try_emplace(off + static_cast<int>(a), Eigen::MatrixXd::Zero(f.rows(), f.cols()));
        it->second += t.scale * f;
      }
    }
    for (const auto& [a, f] : per_scalar) emit(a + 1, static_cast<int>(b), f);
  }
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::NearOptimal: return "near-optimal";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Schur complement tiles

SchurTiles SchurTiles::layout_for(const CongruenceLmiProblem& problem) {
  SchurTiles s;
  const int nv = static_cast<int>(problem.variables.size());
  s.offsets.resize(nv);
  s.sizes.resize(nv);
  int off = 0;
  for (int v = 0; v < nv; ++v) {
    s.offsets[v] = off;
    s.sizes[v] = static_cast<int>(problem.variables[v].free.size());
    off += s.sizes[v];
  }
  std::vector<std::pair<int, int>> pairs;
  for (int v = 0; v < nv; ++v) pairs.emplace_back(v, v);
  for (const auto& blk : problem.blocks) {
    for (const auto& t : blk.terms)
      for (const auto& u : blk.terms)
        if (t.variable < u.variable) pairs.emplace_back(t.variable, u.variable);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  s.pairs = pairs;
  for (const auto& [v, w] : s.pairs) s.tiles.push_back(Eigen::MatrixXd::Zero(s.sizes[v], s.sizes[w]));
  return s;
}

int SchurTiles::find(int v, int w) const {
  const auto it = std::lower_bound(pairs.begin(), pairs.end(), std::make_pair(v, w));
  if (it == pairs.end() || *it != std::make_pair(v, w)) return -1;
  return static_cast<int>(it - pairs.begin());
}

void SchurTiles::set_zero() {
  for (auto& t : tiles) t.setZero();
}

Eigen::MatrixXd SchurTiles::dense() const {
  const int n = offsets.empty() ? 0 : offsets.back() + sizes.back();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [v, w] = pairs[i];
    h.block(offsets[v], offsets[w], sizes[v], sizes[w]) = tiles[i];
    if (v != w) h.block(offsets[w], offsets[v], sizes[w], sizes[v]) = tiles[i].transpose();
  }
  return h;
}

Eigen::SparseMatrix<double> SchurTiles::lower() const {
  const int n = offsets.empty() ? 0 : offsets.back() + sizes.back();
  std::vector<Eigen::Triplet<double>> trip;
  std::size_t count = 0;
  for (const auto& t : tiles) count += static_cast<std::size_t>(t.size());
  trip.reserve(count);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [v, w] = pairs[i];
    const auto& t = tiles[i];
    for (int c = 0; c < t.cols(); ++c)
      for (int r = 0; r < t.rows(); ++r) {
        // Entry (offsets[v] + r, offsets[w] + c); keep its lower-triangle image.
        const int gi = offsets[v] + r;
        const int gj = offsets[w] + c;
        if (gi >= gj) trip.emplace_back(gi, gj, t(r, c));
        else if (v != w) trip.emplace_back(gj, gi, t(r, c));
      }
  }
  Eigen::SparseMatrix<double> h(n, n);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

namespace {

struct FreeIndex {
  std::vector<int> j, k;
};

std::vector<FreeIndex> free_indices(const CongruenceLmiProblem& problem) {
  std::vector<FreeIndex> out(problem.variables.size());
  for (std::size_t v = 0; v < problem.variables.size(); ++v) {
    for (const auto& [j, k] : problem.variables[v].free) {
      out[v].j.push_back(j);
      out[v].k.push_back(k);
    }
  }
  return out;
}

// tile(a, c) += s * tr(E_a Xh E_c Zh) with E the symmetric unit matrices of the
// free entries; Xh is (dim_v x dim_w), Zh is (dim_w x dim_v).
void accumulate_pair(const FreeIndex& fa, const FreeIndex& fc, const Eigen::MatrixXd& xh, const Eigen::MatrixXd& zh,
                     double s, Eigen::MatrixXd& tile) {
  const int na = static_cast<int>(fa.j.size());
  const int nc = static_cast<int>(fc.j.size());
  for (int c = 0; c < nc; ++c) {
    const int l = fc.j[c];
    const int m = fc.k[c];
    const bool offc = l != m;
    double* col = tile.col(c).data();
    for (int a = 0; a < na; ++a) {
      const int j = fa.j[a];
      const int k = fa.k[a];
      double v = xh(k, l) * zh(m, j);
      if (offc) v += xh(k, m) * zh(l, j);
      if (j != k) {
        v += xh(j, l) * zh(m, k);
        if (offc) v += xh(j, m) * zh(l, k);
      }
      col[a] += s * v;
    }
  }
}

void accumulate_block(const CongruenceLmiProblem& problem, const std::vector<FreeIndex>& fi, int b,
                      const Eigen::MatrixXd& x, const Eigen::MatrixXd& z_inv, SchurTiles& out) {
  const auto& terms = problem.blocks[b].terms;
  for (const auto& t : terms) {
    for (const auto& u : terms) {
      if (t.variable > u.variable) continue;
      const auto& ut = problem.factors[t.factor];
      const auto& uu = problem.factors[u.factor];
      const Eigen::MatrixXd xh = ut * x * uu.transpose();
      const Eigen::MatrixXd zh = uu * z_inv * ut.transpose();
      const int tile = out.find(t.variable, u.variable);
      accumulate_pair(fi[t.variable], fi[u.variable], xh, zh, t.scale * u.scale, out.tiles[tile]);
    }
  }
}

}  // namespace

void schur_complement_serial(const CongruenceLmiProblem& problem, const std::vector<Eigen::MatrixXd>& x,
                             const std::vector<Eigen::MatrixXd>& z_inv, SchurTiles& out) {
  const auto fi = free_indices(problem);
  out.set_zero();
  for (int b = 0; b < static_cast<int>(problem.blocks.size()); ++b) accumulate_block(problem, fi, b, x[b], z_inv[b], out);
}

void schur_complement_parallel(const CongruenceLmiProblem& problem, const std::vector<Eigen::MatrixXd>& x,
                               const std::vector<Eigen::MatrixXd>& z_inv, SchurTiles& out) {
#ifdef _OPENMP
  const auto fi = free_indices(problem);
  out.set_zero();
  const int nb = static_cast<int>(problem.blocks.size());
  const int nt = omp_get_max_threads();
  if (nt <= 1) {
    for (int b = 0; b < nb; ++b) accumulate_block(problem, fi, b, x[b], z_inv[b], out);
    return;
  }
  std::vector<SchurTiles> partial(static_cast<std::size_t>(nt), out);
#pragma omp parallel num_threads(nt)
  {
    auto& mine = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
    for (int b = 0; b < nb; ++b) accumulate_block(problem, fi, b, x[b], z_inv[b], mine);
  }
  // Fixed reduction order keeps results reproducible for a given thread count.
  for (const auto& p : partial)
    for (std::size_t i = 0; i < out.tiles.size(); ++i) out.tiles[i] += p.tiles[i];
#else
  schur_complement_serial(problem, x, z_inv, out);
#endif
}

Eigen::VectorXd apply_adjoint(const CongruenceLmiProblem& problem, const std::vector<Eigen::MatrixXd>& w,
                              bool parallel) {
  const int nb = static_cast<int>(problem.blocks.size());
  const auto fi = free_indices(problem);
  std::vector<int> offsets(problem.variables.size());
  for (std::size_t v = 0; v < offsets.size(); ++v) offsets[v] = problem.offset(static_cast<int>(v));

  // Per-block projections are independent; the sum over blocks is sequential.
  std::vector<std::vector<Eigen::MatrixXd>> projected(static_cast<std::size_t>(nb));
  auto project = [&](int b) {
    const auto& blk = problem.blocks[b];
    auto& proj = projected[static_cast<std::size_t>(b)];
    proj.clear();
    for (const auto& t : blk.terms) {
      const auto& u = problem.factors[t.factor];
      proj.push_back(t.scale * (u * w[b] * u.transpose()));
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nb; ++b) project(b);
  } else {
    for (int b = 0; b < nb; ++b) project(b);
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(problem.num_scalars());
  for (int b = 0; b < nb; ++b) {
    const auto& blk = problem.blocks[b];
    for (std::size_t ti = 0; ti < blk.terms.size(); ++ti) {
      const int v = blk.terms[ti].variable;
      const auto& wh = projected[static_cast<std::size_t>(b)][ti];
      const auto& f = fi[v];
      for (std::size_t a = 0; a < f.j.size(); ++a) {
        const int j = f.j[a];
        const int k = f.k[a];
        out[offsets[v] + static_cast<int>(a)] += (j == k) ? wh(j, j) : wh(j, k) + wh(k, j);
      }
    }
  }
  return out;
}

}  // namespace adpmpc::sdp

// Serial versus OpenMP kernels: candidate evaluation of the exhaustive search
// and the Schur complement of the interior-point Newton system.

#include <random>

#include <benchmark/benchmark.h>

#include "adpmpc/adp.hpp"
#include "adpmpc/kernels.hpp"
#include "adpmpc/runner.hpp"

using namespace adpmpc;

namespace {

AugmentedModel default_model() {
  const PerUnitParams p;
  return assemble_augmented(discretize(build_continuous(p), p), p, ControllerTuning{});
}

QuadValueFunction some_tail() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat12 a;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) a(i, j) = u(rng);
  QuadValueFunction vf;
  vf.P = a * a.transpose();
  vf.P.row(layout::kConst).setZero();
  vf.P.col(layout::kConst).setZero();
  return vf;
}

using Kernel = void (*)(const CondensedQP&, const Eigen::VectorXd&, const Eigen::VectorXd&, const SwitchPosition&,
                        double, CandidateTable&);

void run_candidates(benchmark::State& state, Kernel kernel) {
  const int N = static_cast<int>(state.range(0));
  const CondensedQP qp = build_condensed(default_model(), some_tail(), N);
  std::mt19937_64 rng(7);
  const Vec12 z = random_augmented_state(rng);
  const Eigen::VectorXd f = qp.f(z), b = qp.b_ineq(z);
  const SwitchPosition prev(static_cast<int>(z[layout::kUprev]), static_cast<int>(z[layout::kUprev + 1]),
                            static_cast<int>(z[layout::kUprev + 2]));
  CandidateTable table;
  for (auto _ : state) {
    kernel(qp, f, b, prev, kFloatCostBound, table);
    benchmark::DoNotOptimize(table.cost.data());
  }
  state.SetItemsProcessed(state.iterations() * qp.candidates());
}

void BM_candidates_reference(benchmark::State& s) { run_candidates(s, evaluate_candidates_reference); }
void BM_candidates_serial(benchmark::State& s) { run_candidates(s, evaluate_candidates_serial); }
void BM_candidates_parallel(benchmark::State& s) { run_candidates(s, evaluate_candidates_parallel); }

using SchurKernel = void (*)(const sdp::CongruenceLmiProblem&, const std::vector<Eigen::MatrixXd>&,
                             const std::vector<Eigen::MatrixXd>&, sdp::SchurTiles&);

void run_schur(benchmark::State& state, SchurKernel kernel) {
  BellmanSdp sdp;
  sdp.iterations = static_cast<int>(state.range(0));
  const auto problem = build_bellman_problem(sdp, default_model());
  std::vector<Eigen::MatrixXd> x, zinv;
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const int d = problem.block_dim(static_cast<int>(b));
    x.push_back(Eigen::MatrixXd::Identity(d, d));
    zinv.push_back(2.0 * Eigen::MatrixXd::Identity(d, d));
  }
  auto tiles = sdp::SchurTiles::layout_for(problem);
  for (auto _ : state) {
    kernel(problem, x, zinv, tiles);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(problem.blocks.size()));
}

void BM_schur_serial(benchmark::State& s) { run_schur(s, sdp::schur_complement_serial); }
void BM_schur_parallel(benchmark::State& s) { run_schur(s, sdp::schur_complement_parallel); }

}  // namespace

BENCHMARK(BM_candidates_reference)->Arg(1)->Arg(2)->Arg(3);
BENCHMARK(BM_candidates_serial)->Arg(1)->Arg(2)->Arg(3);
BENCHMARK(BM_candidates_parallel)->Arg(1)->Arg(2)->Arg(3);
BENCHMARK(BM_schur_serial)->Arg(5)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_schur_parallel)->Arg(5)->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

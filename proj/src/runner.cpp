#include "adpmpc/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

namespace adpmpc {

TrainOutcome train_tail(const RunConfig& cfg, bool ci) {
  cfg.validate();
  const AugmentedModel model = assemble_augmented(discretize(build_continuous(cfg.params), cfg.params), cfg.params,
                                                  cfg.tuning);
  const BellmanSdp sdp = bellman_sdp_for(cfg, ci);
  sdp::SolverOptions opts;
  opts.tolerance = cfg.solver_tolerance;
  opts.parallel = cfg.parallel;
  sdp::InteriorPointSolver solver(opts);
  TrainOutcome out;
  out.result = solve_tail_sdp(sdp, model, solver);
  out.artifact.tail = out.result.tail;
  out.artifact.fingerprint = tail_fingerprint(cfg);
  out.artifact.bellman_iterations = sdp.iterations;
  out.artifact.objective = out.result.objective;
  out.artifact.status = sdp::to_string(out.result.solve.status);
  return out;
}

std::pair<TailArtifact, bool> cached_tail(const RunConfig& cfg, bool ci, const std::string& path) {
  const int depth = ci ? cfg.ci_bellman_iterations : cfg.bellman_iterations;
  if (std::filesystem::exists(path)) {
    try {
      TailArtifact a = load_tail(path);
      check_tail(a, cfg);
      if (a.bellman_iterations == depth) return {a, false};
    } catch (const std::exception&) {
      // Stale or damaged cache entries are retrained below.
    }
  }
  TailArtifact a = train_tail(cfg, ci).artifact;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write tail artifact '" + path + "'");
  write_tail(a, cfg, os);
  return {a, true};
}

Vec12 random_augmented_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phys(-1.5, 1.5), unit(0.0, 1.0), flt(0.0, 2.0);
  std::uniform_int_distribution<int> level(-1, 1);
  Vec12 z = Vec12::Zero();
  for (int i = 0; i < 4; ++i) z[i] = phys(rng);
  const double amp = unit(rng), ang = 2.0 * std::numbers::pi * unit(rng);
  z[layout::kOsc] = amp * std::sin(ang);
  z[layout::kOsc + 1] = -amp * std::cos(ang);
  z[layout::kFlt] = flt(rng);
  z[layout::kFlt + 1] = flt(rng);
  z[layout::kConst] = 1.0;
  for (int i = 0; i < 3; ++i) z[layout::kUprev + i] = level(rng);
  return z;
}

SpotCheck bellman_spot_check(const RunConfig& cfg, const std::vector<QuadValueFunction>& iterates, int samples,
                             std::uint64_t seed) {
  const AugmentedModel model = assemble_augmented(discretize(build_continuous(cfg.params), cfg.params), cfg.params,
                                                  cfg.tuning);
  std::mt19937_64 rng(seed);
  std::vector<Vec12> states(static_cast<std::size_t>(samples));
  for (auto& z : states) z = random_augmented_state(rng);
  double worst = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : worst) schedule(static)
  for (int s = 0; s < samples; ++s)
    worst = std::min(worst, bellman_chain_residual(iterates, model, states[static_cast<std::size_t>(s)]));
  return {samples, worst};
}

std::unique_ptr<Controller> make_controller(const RunConfig& cfg, const QuadValueFunction* tail) {
  cfg.validate();
  if (cfg.controller == ControllerKind::Dmpc)
    return std::make_unique<DmpcController>(cfg.params, cfg.tuning, cfg.lambda_u, cfg.horizon, cfg.limits);
  if (!tail) throw ConfigError("the ADP controller needs a trained tail cost");
  if (cfg.profile == NumericProfile::Fixed)
    return std::make_unique<FixedAdpController>(cfg.params, cfg.tuning, *tail, cfg.horizon, FixedProfile{},
                                                cfg.limits);
  return std::make_unique<AdpController>(cfg.params, cfg.tuning, *tail, cfg.horizon, cfg.parallel, cfg.limits);
}

SimulationOutput simulate(const RunConfig& cfg, const QuadValueFunction* tail) {
  auto controller = make_controller(cfg, tail);
  SimulationOutput out;
  double us = 0.0;
  out.trace = run_closed_loop(cfg.scenario, cfg.params, *controller, cfg.limits, &us);
  out.metrics = compute_metrics(out.trace, cfg.scenario, cfg.params);
  out.metrics.mean_solve_us = us;
  if (const auto* fx = dynamic_cast<const FixedAdpController*>(controller.get())) out.audit = fx->audit();
  return out;
}

std::string run_label(const RunConfig& cfg) {
  char buf[96];
  if (cfg.controller == ControllerKind::Dmpc) {
    std::snprintf(buf, sizeof buf, "dmpc N=%d lambda_u=%g", cfg.horizon, cfg.lambda_u);
  } else {
    std::snprintf(buf, sizeof buf, "adp N=%d delta=%g%s", cfg.horizon, cfg.tuning.delta,
                  cfg.profile == NumericProfile::Fixed ? " fixed" : "");
  }
  return buf;
}

}  // namespace adpmpc

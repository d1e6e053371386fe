#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>

#include "adpmpc/config.hpp"

namespace adpmpc {

struct TrainOutcome {
  TailArtifact artifact;
  TrainResult result;
};

/// Solves the tail-cost SDP for `cfg` (the reduced Bellman depth when `ci`).
/// Throws TrainingError when the solver does not converge.
TrainOutcome train_tail(const RunConfig& cfg, bool ci);

/// Loads `path` if it holds a tail trained for `cfg` with the requested
/// depth, otherwise trains and writes it there. Returns the artifact and
/// whether it was freshly trained.
std::pair<TailArtifact, bool> cached_tail(const RunConfig& cfg, bool ci, const std::string& path);

/// Augmented state drawn for property checks: currents and fluxes uniform in
/// [-1.5, 1.5], a reference phasor of amplitude up to 1 at a uniform angle,
/// filter states in [0, 2] and a random previous switch position.
Vec12 random_augmented_state(std::mt19937_64& rng);

struct SpotCheck {
  int samples = 0;
  double worst_residual = 0.0;  // smallest Bellman-chain residual seen
};

/// Evaluates the iterated Bellman inequality of the trained chain at
/// `samples` random states.
SpotCheck bellman_spot_check(const RunConfig& cfg, const std::vector<QuadValueFunction>& iterates, int samples,
                             std::uint64_t seed);

/// ADP (float or fixed) or DMPC controller for `cfg`. ADP needs a tail.
std::unique_ptr<Controller> make_controller(const RunConfig& cfg, const QuadValueFunction* tail);

struct SimulationOutput {
  Trace trace;
  RunMetrics metrics;
  std::optional<FixedAudit> audit;  // fixed-point profile only
};

SimulationOutput simulate(const RunConfig& cfg, const QuadValueFunction* tail);

/// Label such as "adp N=1 delta=4" used in reports.
std::string run_label(const RunConfig& cfg);

}  // namespace adpmpc

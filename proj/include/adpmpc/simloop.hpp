#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adpmpc/controller.hpp"
#include "adpmpc/perunit.hpp"

namespace adpmpc {

struct TorqueStep {
  double time = 0.0;  // seconds from the start of the run
  double t_star = 0.0;
};

struct Scenario {
  int periods = 24;        // total fundamental periods simulated
  int warmup_periods = 4;  // excluded from the metrics
  double initial_torque = 1.0;
  double initial_angle = 0.0;  // reference angle at k = 0
  std::vector<TorqueStep> steps;
  double sanity_limit = 10.0;  // pu, on the physical state norm
  double settling_band = 0.05;  // pu of rated torque
  double fundamental_hz = 50.0;

  void validate(const PerUnitParams& params) const;
  int samples_per_period(const PerUnitParams& params) const;
};

/// Per-sample record of a run. Entry k holds the plant state at k, the
/// reference the controller used at k, the applied switch position u(k) and
/// the filter estimate after step k.
struct Trace {
  std::vector<double> t;
  std::vector<Eigen::Vector3d> i_abc;
  std::vector<Eigen::Vector3d> ref_abc;
  std::vector<SwitchPosition> u;
  std::vector<double> f_hat;
  std::vector<double> torque;
  std::vector<double> t_star;
  SwitchPosition u_initial;  // switch position before the first sample
  std::size_t size() const { return t.size(); }
};

struct RunMetrics {
  std::array<double, 3> thd_phase{};
  double thd_mean = 0.0;
  bool thd_defined = false;
  double fsw_measured = 0.0;
  double fsw_filter_final = 0.0;
  std::vector<std::optional<double>> settling_ms;  // one per torque step
  double max_current_error = 0.0;
  double mean_solve_us = 0.0;
  long max_phase_jump = 0;  // largest per-phase |u(k) - u(k-1)|; 1 means no shoot-through
};

struct StateBlowUp : std::runtime_error {
  StateBlowUp(const std::string& what, long k) : std::runtime_error(what), step(k) {}
  long step;
};

/// Runs the controller against the plant. The controller's memory is set up
/// so that its first reference sample is at `initial_angle`.
Trace run_closed_loop(const Scenario& scenario, const PerUnitParams& params, Controller& controller,
                      ReferenceLimits limits = {}, double* mean_solve_us = nullptr);

RunMetrics compute_metrics(const Trace& trace, const Scenario& scenario, const PerUnitParams& params);

/// CSV with a header row; `fingerprint` goes into a leading comment line.
void write_trace_csv(const Trace& trace, const std::string& fingerprint, std::ostream& os);
void write_metrics(const RunMetrics& m, const Scenario& scenario, const std::string& label,
                   const std::string& fingerprint, std::ostream& os);

}  // namespace adpmpc

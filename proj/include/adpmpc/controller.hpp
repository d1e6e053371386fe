#pragma once

#include <memory>

#include <Eigen/Core>

#include "adpmpc/adp.hpp"
#include "adpmpc/condensed.hpp"
#include "adpmpc/kernels.hpp"

namespace adpmpc {

struct ControlDecision {
  SwitchPosition u_sw;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  double J_min = 0.0;
  int candidates_evaluated = 0;
  int feasible_count = 0;
  int index = -1;  // position of the chosen sequence in the table
};

/// Exhaustive search over all 27^N sequences. The previous switch position is
/// read from x0. Throws std::logic_error if nothing is feasible.
ControlDecision exhaustive_solve(const CondensedQP& qp, const Vec12& x0, bool parallel = false,
                                 double j_ub = kFloatCostBound);

/// Direct MPC with a switching penalty and no tail:
///   sum_{k<N} ||e_i(k+1)||^2 + lambda_u ||u_sw(k) - u_sw(k-1)||_1.
/// The tracking error is affine in the switch sequence; this holds its maps.
struct DmpcQP {
  int N = 1;
  Eigen::MatrixXd free_response;  // 2N x 12: errors with all inputs at zero
  Eigen::MatrixXd forced;         // 2N x 3N: response to the stacked u_sw
};

DmpcQP build_dmpc(const AugmentedModel& model, int N);

ControlDecision baseline_dmpc_solve(const DmpcQP& qp, const Vec12& x0, double lambda_u);

/// Data the controller carries between samples: x_osc(k-1), x_sw(k-1),
/// p(k-1), u_sw(k-1) and the torque reference last seen.
struct ControllerMemory {
  OscState osc;
  Eigen::Vector2d x_sw{1.0, 1.0};  // filter states normalized by the target frequency
  Eigen::Vector3d p_prev = Eigen::Vector3d::Zero();
  SwitchPosition u_prev;
  double t_star = 1.0;
};

struct ReferenceLimits {
  double max_torque = 1.0;
  double rated_amplitude = 1.0;
};

/// One sampling instant of the control loop: update oscillator and filter,
/// assemble the augmented state, pick the switch position.
class Controller {
 public:
  Controller(const PerUnitParams& params, const ControllerTuning& tuning, ReferenceLimits limits = {});
  virtual ~Controller() = default;

  virtual void initialize(const ControllerMemory& memory) { mem_ = memory; }
  const ControllerMemory& memory() const { return mem_; }
  /// Augmented state used by the most recent step.
  const Vec12& last_state() const { return x0_; }
  double f_hat() const { return mem_.x_sw[1] * tuning_.fsw_target; }

  virtual ControlDecision step(double t_star, const PhysState& x_ph);

 protected:
  virtual ControlDecision decide(const Vec12& x0) = 0;

  PerUnitParams params_;
  ControllerTuning tuning_;
  ReferenceLimits limits_;
  Eigen::Matrix2d rot_;
  Eigen::Matrix2d a_flt_;
  Eigen::Matrix<double, 2, 3> b_flt_;  // normalized
  ControllerMemory mem_;
  Vec12 x0_ = Vec12::Zero();
};

class AdpController final : public Controller {
 public:
  AdpController(const PerUnitParams& params, const ControllerTuning& tuning, const QuadValueFunction& tail,
                int horizon, bool parallel = false, ReferenceLimits limits = {});
  const CondensedQP& qp() const { return qp_; }

 protected:
  ControlDecision decide(const Vec12& x0) override;

 private:
  CondensedQP qp_;
  bool parallel_;
};

class DmpcController final : public Controller {
 public:
  DmpcController(const PerUnitParams& params, const ControllerTuning& tuning, double lambda_u, int horizon,
                 ReferenceLimits limits = {});

 protected:
  ControlDecision decide(const Vec12& x0) override;

 private:
  DmpcQP qp_;
  double lambda_u_;
};

}  // namespace adpmpc

#pragma once

#include <vector>

#include <Eigen/Core>

#include "adpmpc/perunit.hpp"

namespace adpmpc {

/// Layout of the 12-dimensional augmented state and 6-dimensional input.
namespace layout {
inline constexpr int kPhys = 0;   // i_s alpha/beta, psi_r alpha/beta
inline constexpr int kOsc = 4;    // current reference alpha/beta
inline constexpr int kFlt = 6;    // normalized switching-frequency filter states
inline constexpr int kConst = 8;  // constant 1 (normalized target frequency)
inline constexpr int kUprev = 9;  // previous switch positions
inline constexpr int kNx = 12;
inline constexpr int kNu = 6;     // u_sw (3) followed by p (3)
inline constexpr int kFree = 8;   // states that are not fixed by enumeration
}  // namespace layout

using Vec12 = Eigen::Matrix<double, layout::kNx, 1>;
using Vec6 = Eigen::Matrix<double, layout::kNu, 1>;
using Mat12 = Eigen::Matrix<double, layout::kNx, layout::kNx>;

/// Tuning of the augmented cost and of the switching-frequency estimator.
struct ControllerTuning {
  double gamma = 0.95;
  double delta = 4.0;
  double fsw_target = 300.0;  // Hz
  double r1 = 800.0;
  double r2 = 800.0;

  double a1() const { return 1.0 - 1.0 / r1; }
  double a2() const { return 1.0 - 1.0 / r2; }
  void validate() const;
};

/// Current reference oscillator. `phase` is the unit phasor (sin t, -cos t);
/// `x_osc` is `amplitude * phase` and is what the controller sees.
struct OscState {
  Eigen::Vector2d x_osc{0.0, -1.0};
  Eigen::Vector2d phase{0.0, -1.0};
  double amplitude = 1.0;

  static OscState at(double amplitude, double angle);
};

OscState step_oscillator(const OscState& osc, const PerUnitParams& params);

/// Rescales the reference so the steady-state torque at rated flux equals
/// `t_star`. The reference angle is kept. Throws on |t_star| > max_torque.
OscState reset_oscillator(double t_star, const OscState& osc, double max_torque = 1.0,
                          double rated_amplitude = 1.0);

/// Second-order IIR switching-frequency estimator, states in Hz.
struct FilterState {
  Eigen::Vector2d x_flt = Eigen::Vector2d::Zero();
  double f_hat() const { return x_flt[1]; }
};

Eigen::Matrix2d filter_a(const ControllerTuning& tuning);
Eigen::Matrix<double, 2, 3> filter_b(const ControllerTuning& tuning, const PerUnitParams& params);

FilterState step_filter(const FilterState& flt, const Eigen::Vector3d& p, const ControllerTuning& tuning,
                        const PerUnitParams& params);

/// Per-phase switching indicator |u_now - u_prev|. Throws ConstraintViolation
/// on a two-level jump.
Eigen::Vector3d p_from_inputs(const SwitchPosition& u_now, const SwitchPosition& u_prev);

struct ConstraintViolation : std::domain_error {
  using std::domain_error::domain_error;
};

struct FeasibleInput {
  SwitchPosition u_sw;
  Eigen::Vector3d p;
};

/// All switch positions reachable from `u_prev` without a -1 <-> 1 jump, in
/// lexicographic order (phase a first, -1 < 0 < 1).
std::vector<FeasibleInput> feasible_inputs(const SwitchPosition& u_prev);

struct AugmentedState {
  PhysState phys;
  Eigen::Vector2d osc = Eigen::Vector2d::Zero();
  Eigen::Vector3d sw{0.0, 0.0, 1.0};  // [x_flt / f* ; 1]
  SwitchPosition u_prev;

  Vec12 vec() const;
  static AugmentedState from_vec(const Vec12& z);
};

struct AugmentedModel {
  Mat12 A;
  Eigen::Matrix<double, layout::kNx, layout::kNu> B;
  Eigen::Matrix<double, 3, layout::kNx> C;
  Eigen::Matrix<double, 3, layout::kNu> G;
  Eigen::Matrix<double, 3, layout::kNu> T;
  Eigen::Matrix<double, 3, layout::kNx> W;
  ControllerTuning tuning;

  /// Stage cost ||C z||^2.
  double stage_cost(const Vec12& z) const { return (C * z).squaredNorm(); }
  Vec12 step(const Vec12& z, const Vec6& u) const { return A * z + B * u; }
};

Vec6 make_input(const SwitchPosition& u_sw, const Eigen::Vector3d& p);

AugmentedModel assemble_augmented(const DiscreteModel& dm, const PerUnitParams& params,
                                  const ControllerTuning& tuning);

}  // namespace adpmpc

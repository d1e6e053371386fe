#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adpmpc/controller.hpp"

namespace adpmpc {

/// Two's-complement (or unsigned) fixed-point format Q(int_bits, frac_bits).
/// For signed formats the sign bit is counted in int_bits, so Q(2,22) spans
/// [-2, 2 - 2^-22].
struct FixedFormat {
  int int_bits = 2;
  int frac_bits = 22;
  bool is_signed = true;

  void validate() const;
  int total_bits() const { return int_bits + frac_bits; }
  std::int64_t max_raw() const;
  std::int64_t min_raw() const;
  double resolution() const;
  double max_value() const;
  double min_value() const;
  std::string to_string() const;
};

/// Saturation and rounding bookkeeping for one class of quantities.
struct QuantizationAudit {
  long conversions = 0;
  long saturations = 0;
  double max_abs_error = 0.0;  // over conversions that did not saturate

  void merge(const QuantizationAudit& other);
};

struct FixedScalar {
  std::int64_t raw = 0;
  FixedFormat fmt;

  double value() const;
};

/// Round to nearest, ties to even; saturates at the format bounds (NaN maps
/// to zero and counts as a saturation).
FixedScalar quantize(double x, const FixedFormat& fmt, QuantizationAudit* audit = nullptr);

/// Arithmetic right shift of a wide intermediate with ties-to-even rounding.
__int128 round_shift(__int128 v, int shift);

/// Clamps a raw value into the format, counting saturations.
std::int64_t saturate(__int128 raw, const FixedFormat& fmt, QuantizationAudit* audit = nullptr);

/// Product rounded into `out`.
FixedScalar fixed_mul(const FixedScalar& a, const FixedScalar& b, const FixedFormat& out,
                      QuantizationAudit* audit = nullptr);

/// Sum rounded into `out`.
FixedScalar fixed_add(const FixedScalar& a, const FixedScalar& b, const FixedFormat& out,
                      QuantizationAudit* audit = nullptr);

/// Word lengths of the controller datapath. Coefficients (model and cost
/// matrices) get extra integer bits; they are constants and cost nothing at
/// run time beyond wider multipliers. Costs and coefficients share the
/// fractional width so the candidate sums need no alignment.
struct FixedProfile {
  FixedFormat input{4, 0, true};
  FixedFormat state{2, 22, true};
  FixedFormat cost{2, 22, true};
  FixedFormat coeff{16, 22, true};

  void validate() const;
};

/// Counters collected while the fixed-point controller runs.
struct FixedAudit {
  QuantizationAudit coefficients;  // one-off quantization of the controller matrices
  QuantizationAudit measurements;  // plant states entering the controller
  QuantizationAudit linear_terms;  // f(x0) and b(x0)
  QuantizationAudit costs;         // candidate costs
  QuantizationAudit recursive;     // oscillator and filter updates
  double max_osc_amplitude_error = 0.0;
  double max_filter_drift = 0.0;  // vs a floating-point shadow of the same filter
  long renormalizations = 0;
  long steps = 0;

  long total_saturations() const;
};

void write_audit(std::ostream& os, const FixedProfile& profile, const FixedAudit& audit);

/// Exhaustive-search controller with the datapath of the FPGA design: every
/// state and cost is a fixed-point word, candidate evaluation is integer
/// arithmetic, and the oscillator amplitude is renormalized once per
/// fundamental period.
class FixedAdpController final : public Controller {
 public:
  FixedAdpController(const PerUnitParams& params, const ControllerTuning& tuning, const QuadValueFunction& tail,
                     int horizon, FixedProfile profile = {}, ReferenceLimits limits = {},
                     int renormalize_every = 800);

  void initialize(const ControllerMemory& memory) override;
  ControlDecision step(double t_star, const PhysState& x_ph) override;

  const FixedAudit& audit() const { return audit_; }
  const FixedProfile& profile() const { return profile_; }
  const CondensedQP& qp() const { return qp_; }

  /// Candidate costs (in cost units) of the most recent step; infeasible
  /// entries hold the cost-format maximum.
  std::vector<double> last_costs() const;
  const std::vector<std::uint8_t>& last_feasible() const { return feasible_; }

  /// Decision for a given augmented state, without touching the controller
  /// memory. The state is quantized first.
  ControlDecision decide_state(const Vec12& x0);

 protected:
  ControlDecision decide(const Vec12& x0) override { return decide_state(x0); }

 private:
  using RawMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
  using RawVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

  RawMatrix quantize_matrix(const Eigen::MatrixXd& m, const FixedFormat& fmt);
  ControlDecision solve_raw(const Eigen::Matrix<std::int64_t, 12, 1>& x_raw);

  FixedProfile profile_;
  int renormalize_every_;
  CondensedQP qp_;
  FixedAudit audit_;

  // Controller matrices in the coefficient format.
  RawMatrix f_x_, b_x_, a_p0_, a_static_;
  RawVector f_0_, b_0_;
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> u_seq_;  // sequence inputs, p0 entries zero
  RawMatrix cross_;  // 3 x 27^N
  RawVector quad_;   // per sequence, exact integer combination of Q
  RawMatrix q_p0_;
  Eigen::Matrix<std::int64_t, 2, 2> rot_raw_;
  Eigen::Matrix<std::int64_t, 2, 2> a_flt_raw_;
  std::int64_t b_flt_raw_ = 0;

  // Recursive state in the state format.
  Eigen::Matrix<std::int64_t, 2, 1> phase_raw_;
  Eigen::Matrix<std::int64_t, 2, 1> x_sw_raw_;
  std::int64_t amplitude_raw_ = 0;
  Eigen::Vector2d x_sw_shadow_;
  long since_renorm_ = 0;

  std::vector<std::int64_t> cost_raw_;
  std::vector<std::uint8_t> feasible_;
};

}  // namespace adpmpc

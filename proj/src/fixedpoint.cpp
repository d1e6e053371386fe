#include "adpmpc/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace adpmpc {

using namespace layout;

namespace {

using Raw2 = Eigen::Matrix<std::int64_t, 2, 1>;
using RawState = Eigen::Matrix<std::int64_t, kNx, 1>;

void record(QuantizationAudit* audit, bool saturated, double error) {
  if (!audit) return;
  ++audit->conversions;
  if (saturated) ++audit->saturations;
  else audit->max_abs_error = std::max(audit->max_abs_error, error);
}

double to_double(std::int64_t raw, int frac_bits) { return std::ldexp(static_cast<double>(raw), -frac_bits); }

}  // namespace

void FixedFormat::validate() const {
  if (int_bits < 0 || frac_bits < 0) throw std::invalid_argument("fixed-point bit counts must be non-negative");
  const int limit = is_signed ? 64 : 63;
  if (total_bits() < 1 || total_bits() > limit) throw std::invalid_argument("fixed-point word must be 1 to 64 bits");
  if (is_signed && int_bits < 1) throw std::invalid_argument("signed formats need the sign bit among int_bits");
}

std::int64_t FixedFormat::max_raw() const {
  const int mag = is_signed ? total_bits() - 1 : total_bits();
  return mag >= 63 ? INT64_MAX : (std::int64_t{1} << mag) - 1;
}

std::int64_t FixedFormat::min_raw() const {
  if (!is_signed) return 0;
  return total_bits() >= 64 ? INT64_MIN : -(std::int64_t{1} << (total_bits() - 1));
}

double FixedFormat::resolution() const { return std::ldexp(1.0, -frac_bits); }
double FixedFormat::max_value() const { return to_double(max_raw(), frac_bits); }
double FixedFormat::min_value() const { return to_double(min_raw(), frac_bits); }

std::string FixedFormat::to_string() const {
  return std::string(is_signed ? "Q" : "UQ") + "(" + std::to_string(int_bits) + "," + std::to_string(frac_bits) + ")";
}

void QuantizationAudit::merge(const QuantizationAudit& other) {
  conversions += other.conversions;
  saturations += other.saturations;
  max_abs_error = std::max(max_abs_error, other.max_abs_error);
}

double FixedScalar::value() const { return to_double(raw, fmt.frac_bits); }

FixedScalar quantize(double x, const FixedFormat& fmt, QuantizationAudit* audit) {
  fmt.validate();
  FixedScalar out{0, fmt};
  if (std::isnan(x)) {
    record(audit, true, 0.0);
    return out;
  }
  // nearbyint under the default rounding mode rounds ties to even.
  const long double scaled = std::nearbyint(std::ldexp(static_cast<long double>(x), fmt.frac_bits));
  if (scaled > static_cast<long double>(fmt.max_raw())) {
    out.raw = fmt.max_raw();
    record(audit, true, 0.0);
  } else if (scaled < static_cast<long double>(fmt.min_raw())) {
    out.raw = fmt.min_raw();
    record(audit, true, 0.0);
  } else {
    out.raw = static_cast<std::int64_t>(scaled);
    record(audit, false, std::abs(out.value() - x));
  }
  return out;
}

__int128 round_shift(__int128 v, int shift) {
  if (shift <= 0) return v * (static_cast<__int128>(1) << -shift);
  const __int128 q = v >> shift;  // floor
  const __int128 rem = v - q * (static_cast<__int128>(1) << shift);
  const __int128 half = static_cast<__int128>(1) << (shift - 1);
  if (rem > half || (rem == half && (q & 1) != 0)) return q + 1;
  return q;
}

std::int64_t saturate(__int128 raw, const FixedFormat& fmt, QuantizationAudit* audit) {
  if (raw > fmt.max_raw()) {
    record(audit, true, 0.0);
    return fmt.max_raw();
  }
  if (raw < fmt.min_raw()) {
    record(audit, true, 0.0);
    return fmt.min_raw();
  }
  record(audit, false, 0.0);
  return static_cast<std::int64_t>(raw);
}

FixedScalar fixed_mul(const FixedScalar& a, const FixedScalar& b, const FixedFormat& out, QuantizationAudit* audit) {
  const __int128 prod = static_cast<__int128>(a.raw) * b.raw;
  const int shift = a.fmt.frac_bits + b.fmt.frac_bits - out.frac_bits;
  return {saturate(round_shift(prod, shift), out, audit), out};
}

FixedScalar fixed_add(const FixedScalar& a, const FixedScalar& b, const FixedFormat& out, QuantizationAudit* audit) {
  const int frac = std::max(a.fmt.frac_bits, b.fmt.frac_bits);
  const __int128 sum = round_shift(a.raw, a.fmt.frac_bits - frac) + round_shift(b.raw, b.fmt.frac_bits - frac);
  return {saturate(round_shift(sum, frac - out.frac_bits), out, audit), out};
}

void FixedProfile::validate() const {
  for (const auto* f : {&input, &state, &cost, &coeff}) f->validate();
  if (input.frac_bits != 0) throw std::invalid_argument("switch positions need an integer format");
  if (cost.frac_bits != coeff.frac_bits)
    throw std::invalid_argument("cost and coefficient formats must share the fractional width");
  if (coeff.total_bits() + state.total_bits() > 100)
    throw std::invalid_argument("coefficient times state product exceeds the accumulator");
}

long FixedAudit::total_saturations() const {
  return coefficients.saturations + measurements.saturations + linear_terms.saturations + costs.saturations +
         recursive.saturations;
}

void write_audit(std::ostream& os, const FixedProfile& profile, const FixedAudit& a) {
  os << "fixed-point profile: input " << profile.input.to_string() << ", state " << profile.state.to_string()
     << ", cost " << profile.cost.to_string() << ", coefficients " << profile.coeff.to_string() << "\n";
  os << "steps " << a.steps << ", total saturations " << a.total_saturations() << "\n";
  const std::pair<const char*, const QuantizationAudit*> rows[] = {{"coefficients", &a.coefficients},
                                                                   {"measurements", &a.measurements},
                                                                   {"linear terms", &a.linear_terms},
                                                                   {"costs", &a.costs},
                                                                   {"osc/filter", &a.recursive}};
  for (const auto& [name, q] : rows) {
    os << "  " << name << ": conversions " << q->conversions << ", saturations " << q->saturations
       << ", max rounding error " << q->max_abs_error << "\n";
  }
  os << "oscillator amplitude error (max between renormalizations) " << a.max_osc_amplitude_error << ", "
     << a.renormalizations << " renormalizations\n";
  os << "filter drift vs floating point (max) " << a.max_filter_drift << "\n";
}

FixedAdpController::FixedAdpController(const PerUnitParams& params, const ControllerTuning& tuning,
                                       const QuadValueFunction& tail, int horizon, FixedProfile profile,
                                       ReferenceLimits limits, int renormalize_every)
    : Controller(params, tuning, limits), profile_(profile), renormalize_every_(renormalize_every) {
  profile_.validate();
  if (renormalize_every_ < 1) throw std::invalid_argument("renormalization interval must be positive");
  qp_ = build_condensed(assemble_augmented(discretize(build_continuous(params_), params_), params_, tuning_), tail,
                        horizon);

  const FixedFormat& cf = profile_.coeff;
  f_x_ = quantize_matrix(qp_.f_x, cf);
  f_0_ = quantize_matrix(qp_.f_0, cf);
  b_x_ = quantize_matrix(qp_.b_x, cf);
  b_0_ = quantize_matrix(qp_.b_0, cf);
  const RawMatrix q_raw = quantize_matrix(qp_.Q, cf);
  const RawMatrix a_raw = quantize_matrix(qp_.A_ineq, cf);

  // Sequence inputs are small integers, so every product with them is exact.
  const SequenceTable& t = qp_.table;
  u_seq_ = t.u_static.array().round().cast<std::int8_t>();
  const RawMatrix u = u_seq_.cast<std::int64_t>();
  const RawMatrix qu = q_raw * u;
  quad_ = u.cwiseProduct(qu).colwise().sum().transpose();
  cross_ = 2 * qu.middleRows(3, 3);
  q_p0_ = q_raw.block(3, 3, 3, 3);
  a_static_ = a_raw * u;
  a_p0_ = a_raw.middleCols(3, 3);

  rot_raw_ = quantize_matrix(rot_, cf);
  a_flt_raw_ = quantize_matrix(a_flt_, cf);
  b_flt_raw_ = quantize(b_flt_(0, 0), cf, &audit_.coefficients).raw;

  cost_raw_.resize(static_cast<std::size_t>(qp_.candidates()));
  feasible_.resize(static_cast<std::size_t>(qp_.candidates()));
  initialize(mem_);
}

FixedAdpController::RawMatrix FixedAdpController::quantize_matrix(const Eigen::MatrixXd& m, const FixedFormat& fmt) {
  RawMatrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, j) = quantize(m(i, j), fmt, &audit_.coefficients).raw;
  return out;
}

void FixedAdpController::initialize(const ControllerMemory& memory) {
  Controller::initialize(memory);
  const FixedFormat& sf = profile_.state;
  for (int k = 0; k < 2; ++k) {
    phase_raw_[k] = quantize(memory.osc.phase[k], sf, &audit_.recursive).raw;
    x_sw_raw_[k] = quantize(memory.x_sw[k], sf, &audit_.recursive).raw;
  }
  amplitude_raw_ = quantize(memory.osc.amplitude, sf, &audit_.recursive).raw;
  x_sw_shadow_ = memory.x_sw;
  since_renorm_ = 0;
}

ControlDecision FixedAdpController::step(double t_star, const PhysState& x_ph) {
  const FixedFormat& sf = profile_.state;
  const FixedFormat& cf = profile_.coeff;
  const int sfb = sf.frac_bits, cfb = cf.frac_bits;
  ++audit_.steps;

  // Oscillator: rotate the unit phasor, renormalize once per period.
  Raw2 phase;
  for (int r = 0; r < 2; ++r) {
    const __int128 acc = static_cast<__int128>(rot_raw_(r, 0)) * phase_raw_[0] +
                         static_cast<__int128>(rot_raw_(r, 1)) * phase_raw_[1];
    phase[r] = saturate(round_shift(acc, cfb), sf, &audit_.recursive);
  }
  const double norm = std::hypot(to_double(phase[0], sfb), to_double(phase[1], sfb));
  audit_.max_osc_amplitude_error = std::max(audit_.max_osc_amplitude_error, std::abs(norm - 1.0));
  if (++since_renorm_ >= renormalize_every_) {
    since_renorm_ = 0;
    ++audit_.renormalizations;
    for (int r = 0; r < 2; ++r) phase[r] = quantize(to_double(phase[r], sfb) / norm, sf, &audit_.recursive).raw;
  }
  if (t_star != mem_.t_star) {
    const OscState reset = reset_oscillator(t_star, mem_.osc, limits_.max_torque, limits_.rated_amplitude);
    amplitude_raw_ = quantize(reset.amplitude, sf, &audit_.recursive).raw;
  }
  Raw2 x_osc;
  for (int r = 0; r < 2; ++r)
    x_osc[r] = saturate(round_shift(static_cast<__int128>(amplitude_raw_) * phase[r], sfb), sf, &audit_.recursive);

  // Filter, with a floating-point shadow to measure drift.
  const std::int64_t p_sum = std::llround(mem_.p_prev.sum());
  Raw2 x_sw;
  {
    const __int128 s0 = static_cast<__int128>(a_flt_raw_(0, 0)) * x_sw_raw_[0] +
                        (static_cast<__int128>(b_flt_raw_) * p_sum << sfb);
    const __int128 s1 = static_cast<__int128>(a_flt_raw_(1, 0)) * x_sw_raw_[0] +
                        static_cast<__int128>(a_flt_raw_(1, 1)) * x_sw_raw_[1];
    x_sw[0] = saturate(round_shift(s0, cfb), sf, &audit_.recursive);
    x_sw[1] = saturate(round_shift(s1, cfb), sf, &audit_.recursive);
  }
  x_sw_shadow_ = a_flt_ * x_sw_shadow_ + b_flt_ * mem_.p_prev;
  for (int r = 0; r < 2; ++r)
    audit_.max_filter_drift = std::max(audit_.max_filter_drift, std::abs(to_double(x_sw[r], sfb) - x_sw_shadow_[r]));

  RawState x_raw;
  for (int k = 0; k < 4; ++k) x_raw[kPhys + k] = quantize(x_ph.x[k], sf, &audit_.measurements).raw;
  x_raw.segment<2>(kOsc) = x_osc;
  x_raw.segment<2>(kFlt) = x_sw;
  x_raw[kConst] = std::int64_t{1} << sfb;
  for (int k = 0; k < 3; ++k) x_raw[kUprev + k] = mem_.u_prev[k];

  const ControlDecision d = solve_raw(x_raw);

  for (int k = 0; k < kUprev; ++k) x0_[k] = to_double(x_raw[k], sfb);
  x0_.segment<3>(kUprev) = mem_.u_prev.vec();
  phase_raw_ = phase;
  x_sw_raw_ = x_sw;
  mem_.osc.phase = {to_double(phase[0], sfb), to_double(phase[1], sfb)};
  mem_.osc.x_osc = x0_.segment<2>(kOsc);
  mem_.osc.amplitude = to_double(amplitude_raw_, sfb);
  mem_.x_sw = x0_.segment<2>(kFlt);
  mem_.p_prev = d.p;
  mem_.u_prev = d.u_sw;
  mem_.t_star = t_star;
  return d;
}

ControlDecision FixedAdpController::decide_state(const Vec12& x0) {
  RawState x_raw;
  for (int k = 0; k < kUprev; ++k) x_raw[k] = quantize(x0[k], profile_.state, &audit_.measurements).raw;
  for (int k = kUprev; k < kNx; ++k) x_raw[k] = quantize(x0[k], profile_.input, &audit_.measurements).raw;
  return solve_raw(x_raw);
}

ControlDecision FixedAdpController::solve_raw(const RawState& x_raw) {
  const int sfb = profile_.state.frac_bits;
  const int cfb = profile_.coeff.frac_bits;
  const SwitchPosition u_prev(static_cast<int>(x_raw[kUprev]), static_cast<int>(x_raw[kUprev + 1]),
                              static_cast<int>(x_raw[kUprev + 2]));

  // Products of coefficients with states carry cfb + sfb fractional bits;
  // switch positions are integers and are lifted to the same scale.
  auto affine = [&](const RawMatrix& m, const RawVector& c, const FixedFormat& out_fmt, QuantizationAudit* audit) {
    RawVector out(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      __int128 acc = 0;
      for (int k = 0; k < kNx; ++k) {
        const __int128 prod = static_cast<__int128>(m(r, k)) * x_raw[k];
        acc += k >= kUprev ? prod << sfb : prod;
      }
      out[r] = saturate(round_shift(acc, sfb) + c[r], out_fmt, audit);
    }
    return out;
  };
  const RawVector f = affine(f_x_, f_0_, profile_.cost, &audit_.linear_terms);
  const RawVector b = affine(b_x_, b_0_, profile_.coeff, &audit_.linear_terms);

  // Per first switch position: constraint offsets and the p0 cost terms.
  const Eigen::Index rows = a_static_.rows();
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 27> slack(rows, 27);
  Eigen::Matrix<std::int64_t, 3, 27> p0;
  Eigen::Matrix<std::int64_t, 1, 27> p0_cost;
  for (int j = 0; j < 27; ++j) {
    const SwitchPosition first = SwitchPosition::from_index(j);
    for (int ph = 0; ph < 3; ++ph) p0(ph, j) = std::abs(first[ph] - u_prev[ph]);
    slack.col(j) = a_p0_ * p0.col(j) - b;
    p0_cost[j] = p0.col(j).dot(q_p0_ * p0.col(j)) + 2 * f.segment<3>(3).dot(p0.col(j));
  }

  const std::int64_t j_ub = profile_.cost.max_raw();
  const Eigen::Index n = u_seq_.cols();
  const Eigen::Index dim = u_seq_.rows();
  const auto& first_index = qp_.table.first_index;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const int j = first_index[idx];
    bool ok = true;
    for (Eigen::Index r = 0; r < rows && ok; ++r) ok = a_static_(r, i) + slack(r, j) <= 0;
    if (!ok) {
      cost_raw_[idx] = j_ub;
      feasible_[idx] = 0;
      continue;
    }
    __int128 fu = 0;
    for (Eigen::Index k = 0; k < dim; ++k) fu += static_cast<__int128>(f[k]) * u_seq_(k, i);
    const __int128 acc = static_cast<__int128>(quad_[i]) + cross_.col(i).dot(p0.col(j)) + p0_cost[j] + 2 * fu;
    cost_raw_[idx] = saturate(acc, profile_.cost, &audit_.costs);
    feasible_[idx] = 1;
  }

  // Loop 2 on the raw words, same "<=" rule as the floating-point kernel.
  int best = -1, feasible_count = 0;
  std::int64_t j_min = j_ub;
  for (std::size_t i = 0; i < cost_raw_.size(); ++i) {
    if (!feasible_[i]) continue;
    ++feasible_count;
    if (cost_raw_[i] <= j_min) {
      j_min = cost_raw_[i];
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw std::logic_error("no feasible switch sequence");
  ControlDecision d;
  d.u_sw = sequence_entry(best, 0, qp_.N);
  d.p = p_from_inputs(d.u_sw, u_prev);
  d.J_min = to_double(j_min, cfb);
  d.candidates_evaluated = static_cast<int>(n);
  d.feasible_count = feasible_count;
  d.index = best;
  return d;
}

std::vector<double> FixedAdpController::last_costs() const {
  std::vector<double> out(cost_raw_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_double(cost_raw_[i], profile_.cost.frac_bits);
  return out;
}

}  // namespace adpmpc

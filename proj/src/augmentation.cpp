#include "adpmpc/augmentation.hpp"

#include <cmath>
#include <cstdlib>

namespace adpmpc {

using namespace layout;

void ControllerTuning::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be non-negative");
  if (!(fsw_target > 0.0)) throw std::invalid_argument("fsw_target must be positive");
  if (!(r1 > 1.0 && r2 > 1.0)) throw std::invalid_argument("filter parameters r1, r2 must exceed 1");
}

OscState OscState::at(double amplitude, double angle) {
  OscState s;
  s.phase = {std::sin(angle), -std::cos(angle)};
  s.amplitude = amplitude;
  s.x_osc = amplitude * s.phase;
  return s;
}

OscState step_oscillator(const OscState& osc, const PerUnitParams& params) {
  const double c = std::cos(params.That());
  const double s = std::sin(params.That());
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  OscState next = osc;
  next.x_osc = rot * osc.x_osc;
  next.phase = rot * osc.phase;
  return next;
}

OscState reset_oscillator(double t_star, const OscState& osc, double max_torque, double rated_amplitude) {
  if (!std::isfinite(t_star) || std::abs(t_star) > max_torque) {
    throw std::invalid_argument("torque reference out of range");
  }
  const double amplitude = rated_amplitude * t_star;
  if (amplitude == osc.amplitude) return osc;
  OscState next = osc;
  next.amplitude = amplitude;
  next.x_osc = amplitude * osc.phase;
  return next;
}

Eigen::Matrix2d filter_a(const ControllerTuning& tuning) {
  Eigen::Matrix2d a;
  a << tuning.a1(), 0.0, 1.0 - tuning.a1(), tuning.a2();
  return a;
}

Eigen::Matrix<double, 2, 3> filter_b(const ControllerTuning& tuning, const PerUnitParams& params) {
  Eigen::Matrix<double, 2, 3> b = Eigen::Matrix<double, 2, 3>::Zero();
  b.row(0).setConstant((1.0 - tuning.a2()) / (12.0 * params.Ts));
  return b;
}

FilterState step_filter(const FilterState& flt, const Eigen::Vector3d& p, const ControllerTuning& tuning,
                        const PerUnitParams& params) {
  FilterState next;
  next.x_flt = filter_a(tuning) * flt.x_flt + filter_b(tuning, params) * p;
  return next;
}

Eigen::Vector3d p_from_inputs(const SwitchPosition& u_now, const SwitchPosition& u_prev) {
  Eigen::Vector3d p;
  for (int ph = 0; ph < 3; ++ph) {
    const int d = std::abs(u_now[ph] - u_prev[ph]);
    if (d > 1) throw ConstraintViolation("switch position jumps two levels in one step");
    p[ph] = d;
  }
  return p;
}

std::vector<FeasibleInput> feasible_inputs(const SwitchPosition& u_prev) {
  std::vector<FeasibleInput> out;
  out.reserve(27);
  for (int idx = 0; idx < 27; ++idx) {
    const auto u = SwitchPosition::from_index(idx);
    bool ok = true;
    for (int ph = 0; ph < 3; ++ph) ok = ok && std::abs(u[ph] - u_prev[ph]) <= 1;
    if (ok) out.push_back({u, p_from_inputs(u, u_prev)});
  }
  return out;
}

Vec12 AugmentedState::vec() const {
  Vec12 z;
  z.segment<4>(kPhys) = phys.x;
  z.segment<2>(kOsc) = osc;
  z.segment<3>(kFlt) = sw;
  z.segment<3>(kUprev) = u_prev.vec();
  return z;
}

AugmentedState AugmentedState::from_vec(const Vec12& z) {
  AugmentedState s;
  s.phys = PhysState(Eigen::Vector4d(z.segment<4>(kPhys)));
  s.osc = z.segment<2>(kOsc);
  s.sw = z.segment<3>(kFlt);
  s.u_prev = SwitchPosition(static_cast<int>(std::lround(z[kUprev])), static_cast<int>(std::lround(z[kUprev + 1])),
                            static_cast<int>(std::lround(z[kUprev + 2])));
  return s;
}

Vec6 make_input(const SwitchPosition& u_sw, const Eigen::Vector3d& p) {
  Vec6 u;
  u << u_sw.vec(), p;
  return u;
}

AugmentedModel assemble_augmented(const DiscreteModel& dm, const PerUnitParams& params,
                                  const ControllerTuning& tuning) {
  tuning.validate();
  if (!dm.A_ph.allFinite() || !dm.B_ph.allFinite()) throw std::invalid_argument("discrete model is not finite");

  AugmentedModel m;
  m.tuning = tuning;
  m.G.setZero();
  m.G.leftCols<3>().setIdentity();
  m.T.setZero();
  m.T.rightCols<3>().setIdentity();
  m.W.setZero();
  m.W.block<3, 3>(0, kUprev).setIdentity();

  m.A.setZero();
  m.A.block<4, 4>(kPhys, kPhys) = dm.A_ph;
  const double c = std::cos(params.That());
  const double s = std::sin(params.That());
  m.A.block<2, 2>(kOsc, kOsc) << c, -s, s, c;
  m.A.block<2, 2>(kFlt, kFlt) = filter_a(tuning);
  m.A(kConst, kConst) = 1.0;

  m.B.setZero();
  m.B.block<4, 3>(kPhys, 0) = dm.B_ph;
  m.B.block<2, 3>(kFlt, 3) = filter_b(tuning, params) / tuning.fsw_target;
  m.B.block<3, 3>(kUprev, 0).setIdentity();

  m.C.setZero();
  m.C(0, kPhys) = 1.0;
  m.C(0, kOsc) = -1.0;
  m.C(1, kPhys + 1) = 1.0;
  m.C(1, kOsc + 1) = -1.0;
  const double sd = std::sqrt(tuning.delta);
  m.C(2, kFlt + 1) = sd;
  m.C(2, kConst) = -sd;
  return m;
}

}  // namespace adpmpc

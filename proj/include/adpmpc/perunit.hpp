#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>

namespace adpmpc {

/// Machine and inverter constants in per-unit, plus the base quantities used
/// to convert the controller sampling period into per-unit time.
struct PerUnitParams {
  double Rs = 0.0108;
  double Rr = 0.0091;
  double Xls = 0.1493;
  double Xlr = 0.1104;
  double Xm = 2.3489;
  double Vdc = 1.930;
  // Electrical rotor speed, frozen for the whole run. At this slip a 1 pu
  // stator current yields rated torque (0.785 pu) at about 0.98 pu voltage.
  double omega_r = 0.991;
  double Ts = 25e-6;
  double omega_b = 2.0 * std::numbers::pi * 50.0;
  // Carried for completeness; the mechanical equation is not integrated.
  double Tl = 0.0;
  double J = 0.0;

  double Xs() const { return Xls + Xm; }
  double Xr() const { return Xlr + Xm; }
  double D() const { return Xs() * Xr() - Xm * Xm; }
  double tau_s() const { return Xr() * D() / (Rs * Xr() * Xr() + Rr * Xm * Xm); }
  double tau_r() const { return Xr() / Rr; }
  double That() const { return Ts * omega_b; }

  /// Throws std::invalid_argument when a physical invariant is violated.
  void validate() const;
};

/// Stator current and rotor flux in the stationary frame.
struct PhysState {
  Eigen::Vector4d x = Eigen::Vector4d::Zero();

  PhysState() = default;
  explicit PhysState(const Eigen::Vector4d& v) : x(v) {}
  PhysState(double is_a, double is_b, double psi_a, double psi_b) : x(is_a, is_b, psi_a, psi_b) {}

  double is_alpha() const { return x[0]; }
  double is_beta() const { return x[1]; }
  double psi_alpha() const { return x[2]; }
  double psi_beta() const { return x[3]; }
  Eigen::Vector2d current() const { return x.head<2>(); }
  Eigen::Vector2d flux() const { return x.tail<2>(); }
};

/// Three-level switch positions, one per phase leg, each in {-1, 0, 1}.
class SwitchPosition {
 public:
  constexpr SwitchPosition() = default;
  constexpr SwitchPosition(int a, int b, int c) : u_{static_cast<std::int8_t>(a), static_cast<std::int8_t>(b), static_cast<std::int8_t>(c)} {
    if (!in_range(a) || !in_range(b) || !in_range(c)) {
      throw std::invalid_argument("switch position components must be in {-1, 0, 1}");
    }
  }

  constexpr int operator[](int phase) const { return u_[static_cast<std::size_t>(phase)]; }
  constexpr bool operator==(const SwitchPosition&) const = default;

  Eigen::Vector3d vec() const { return {double(u_[0]), double(u_[1]), double(u_[2])}; }

  /// Index in the lexicographic enumeration of {-1,0,1}^3 (phase a most significant).
  constexpr int index() const { return (u_[0] + 1) * 9 + (u_[1] + 1) * 3 + (u_[2] + 1); }
  static constexpr SwitchPosition from_index(int idx) { return {idx / 9 - 1, (idx / 3) % 3 - 1, idx % 3 - 1}; }

 private:
  static constexpr bool in_range(int v) { return v >= -1 && v <= 1; }
  std::array<std::int8_t, 3> u_{0, 0, 0};
};

struct ContinuousModel {
  Eigen::Matrix4d D_mat;
  Eigen::Matrix<double, 4, 3> E_mat;
  Eigen::Matrix<double, 2, 4> F_mat;
};

struct DiscreteModel {
  Eigen::Matrix4d A_ph;
  Eigen::Matrix<double, 4, 3> B_ph;
  Eigen::Matrix<double, 2, 4> C_ph;
};

/// Amplitude-invariant Clarke transform matrix P.
Eigen::Matrix<double, 2, 3> clarke_matrix();
/// Right inverse P^+ with P * P^+ = I.
Eigen::Matrix<double, 3, 2> inverse_clarke_matrix();

Eigen::Vector2d clarke(const Eigen::Vector3d& xi_abc);
Eigen::Vector3d inverse_clarke(const Eigen::Vector2d& xi_ab);

Eigen::Vector2d inverter_voltage(const SwitchPosition& u, const PerUnitParams& params);

ContinuousModel build_continuous(const PerUnitParams& params);

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
/// Throws std::runtime_error if the series does not reach `tol`.
Eigen::MatrixXd expm(const Eigen::MatrixXd& m, double tol = 1e-12);

/// Zero-order-hold discretization over one per-unit sampling interval.
DiscreteModel discretize(const ContinuousModel& cm, const PerUnitParams& params);
/// Same, with an explicit per-unit interval.
DiscreteModel discretize(const ContinuousModel& cm, double that);

double torque(const PhysState& state, const PerUnitParams& params);

PhysState step_plant(const PhysState& state, const SwitchPosition& u, const DiscreteModel& dm);

/// Plant state consistent with a sinusoidal current reference of the given
/// amplitude and angle: currents on the reference, rotor flux at its
/// periodic steady state.
PhysState steady_state(const PerUnitParams& params, double amplitude, double angle);

}  // namespace adpmpc

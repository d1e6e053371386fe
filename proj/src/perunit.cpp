#include "adpmpc/perunit.hpp"

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/LU>

namespace adpmpc {

void PerUnitParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid per-unit parameters: ") + what);
  };
  require(std::isfinite(Rs) && std::isfinite(Rr) && std::isfinite(Xls) && std::isfinite(Xlr) &&
              std::isfinite(Xm) && std::isfinite(Vdc) && std::isfinite(omega_r),
          "non-finite value");
  require(Rs > 0 && Rr > 0, "resistances must be positive");
  require(D() > 0, "D = Xs*Xr - Xm^2 must be positive");
  require(tau_s() > 0 && tau_r() > 0, "time constants must be positive");
  require(Ts > 0, "Ts must be positive");
  require(omega_b > 0, "omega_b must be positive");
  require(Vdc > 0, "Vdc must be positive");
}

Eigen::Matrix<double, 2, 3> clarke_matrix() {
  const double s3 = std::sqrt(3.0) / 2.0;
  Eigen::Matrix<double, 2, 3> p;
  p << 1.0, -0.5, -0.5, 0.0, s3, -s3;
  return (2.0 / 3.0) * p;
}

Eigen::Matrix<double, 3, 2> inverse_clarke_matrix() {
  const double s3 = std::sqrt(3.0) / 2.0;
  Eigen::Matrix<double, 3, 2> p;
  p << 1.0, 0.0, -0.5, s3, -0.5, -s3;
  return p;
}

Eigen::Vector2d clarke(const Eigen::Vector3d& xi_abc) { return clarke_matrix() * xi_abc; }

Eigen::Vector3d inverse_clarke(const Eigen::Vector2d& xi_ab) { return inverse_clarke_matrix() * xi_ab; }

Eigen::Vector2d inverter_voltage(const SwitchPosition& u, const PerUnitParams& params) {
  return 0.5 * params.Vdc * clarke(u.vec());
}

ContinuousModel build_continuous(const PerUnitParams& params) {
  params.validate();
  const double xm = params.Xm;
  const double dd = params.D();
  const double ts = params.tau_s();
  const double tr = params.tau_r();
  const double wr = params.omega_r;

  ContinuousModel cm;
  cm.D_mat << -1.0 / ts, 0.0, xm / (tr * dd), wr * xm / dd,
              0.0, -1.0 / ts, -wr * xm / dd, xm / (tr * dd),
              xm / tr, 0.0, -1.0 / tr, -wr,
              0.0, xm / tr, wr, -1.0 / tr;

  Eigen::Matrix<double, 4, 2> sel = Eigen::Matrix<double, 4, 2>::Zero();
  sel(0, 0) = 1.0;
  sel(1, 1) = 1.0;
  cm.E_mat = (params.Xr() / dd) * (params.Vdc / 2.0) * sel * clarke_matrix();

  cm.F_mat.setZero();
  cm.F_mat(0, 0) = 1.0;
  cm.F_mat(1, 1) = 1.0;

  Eigen::FullPivLU<Eigen::Matrix4d> lu(cm.D_mat);
  if (!lu.isInvertible()) throw std::invalid_argument("continuous state matrix is singular");
  return cm;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& m, double tol) {
  const Eigen::Index n = m.rows();
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd scaled = m / std::ldexp(1.0, squarings);

  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  bool converged = false;
  for (int k = 1; k <= 40; ++k) {
    term = term * scaled / double(k);
    sum += term;
    const double tn = term.cwiseAbs().colwise().sum().maxCoeff();
    const double sn = sum.cwiseAbs().colwise().sum().maxCoeff();
    if (tn <= tol * 1e-4 * sn) {
      converged = true;
      break;
    }
  }
  if (!converged || !sum.allFinite()) throw std::runtime_error("matrix exponential series did not converge");
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

DiscreteModel discretize(const ContinuousModel& cm, const PerUnitParams& params) {
  return discretize(cm, params.That());
}

DiscreteModel discretize(const ContinuousModel& cm, double that) {
  if (!(that > 0)) throw std::invalid_argument("discretization interval must be positive");
  DiscreteModel dm;
  dm.C_ph = cm.F_mat;
  dm.A_ph = expm(cm.D_mat * that);

  if (cm.D_mat.isZero(0.0)) {
    // B = T * sum_k (D T)^k / (k+1)! E, which reduces to T E here.
    dm.B_ph = that * cm.E_mat;
    return dm;
  }
  Eigen::FullPivLU<Eigen::Matrix4d> lu(cm.D_mat);
  if (!lu.isInvertible()) throw std::invalid_argument("continuous state matrix is singular");
  dm.B_ph = -lu.solve((Eigen::Matrix4d::Identity() - dm.A_ph) * cm.E_mat);
  return dm;
}

double torque(const PhysState& state, const PerUnitParams& params) {
  return params.Xm / params.Xr() * (state.psi_alpha() * state.is_beta() - state.psi_beta() * state.is_alpha());
}

PhysState step_plant(const PhysState& state, const SwitchPosition& u, const DiscreteModel& dm) {
  return PhysState(Eigen::Vector4d(dm.A_ph * state.x + dm.B_ph * u.vec()));
}

PhysState steady_state(const PerUnitParams& params, double amplitude, double angle) {
  using cd = std::complex<double>;
  const cd i(amplitude * std::sin(angle), -amplitude * std::cos(angle));
  const double tr = params.tau_r();
  const cd psi = (params.Xm / tr) * i / cd(1.0 / tr, 1.0 - params.omega_r);
  return {i.real(), i.imag(), psi.real(), psi.imag()};
}

}  // namespace adpmpc

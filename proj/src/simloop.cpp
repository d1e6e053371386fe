#include "adpmpc/simloop.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "adpmpc/metrics.hpp"

namespace adpmpc {

int Scenario::samples_per_period(const PerUnitParams& params) const {
  const double n = 1.0 / (fundamental_hz * params.Ts);
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-6 || r < 2) throw std::invalid_argument("a fundamental period must span an integer number of samples");
  return static_cast<int>(r);
}

void Scenario::validate(const PerUnitParams& params) const {
  if (periods < 1) throw std::invalid_argument("scenario needs at least one period");
  if (warmup_periods < 0 || warmup_periods >= periods) throw std::invalid_argument("warmup must be shorter than the run");
  if (!(sanity_limit > 0.0)) throw std::invalid_argument("sanity limit must be positive");
  if (!(settling_band > 0.0)) throw std::invalid_argument("settling band must be positive");
  const double duration = periods * samples_per_period(params) * params.Ts;
  double last = 0.0;
  for (const auto& s : steps) {
    if (!(s.time >= last) || s.time >= duration) throw std::invalid_argument("torque steps must be ordered and inside the run");
    last = s.time;
  }
}

Trace run_closed_loop(const Scenario& scenario, const PerUnitParams& params, Controller& controller,
                      ReferenceLimits limits, double* mean_solve_us) {
  scenario.validate(params);
  const int spp = scenario.samples_per_period(params);
  const long n = static_cast<long>(scenario.periods) * spp;
  const DiscreteModel dm = discretize(build_continuous(params), params);

  const double amp0 = limits.rated_amplitude * scenario.initial_torque;
  ControllerMemory mem;
  mem.osc = OscState::at(amp0, scenario.initial_angle - params.That());
  mem.t_star = scenario.initial_torque;
  controller.initialize(mem);
  PhysState x = steady_state(params, amp0, scenario.initial_angle);

  Trace tr;
  tr.u_initial = mem.u_prev;
  for (auto* v : {&tr.t, &tr.f_hat, &tr.torque, &tr.t_star}) v->reserve(static_cast<std::size_t>(n));
  tr.i_abc.reserve(static_cast<std::size_t>(n));
  tr.ref_abc.reserve(static_cast<std::size_t>(n));
  tr.u.reserve(static_cast<std::size_t>(n));

  double t_star = scenario.initial_torque;
  std::size_t next_step = 0;
  double solve_seconds = 0.0;
  for (long k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * params.Ts;
    while (next_step < scenario.steps.size() && scenario.steps[next_step].time <= t + 0.5 * params.Ts)
      t_star = scenario.steps[next_step++].t_star;

    const auto t0 = std::chrono::steady_clock::now();
    const ControlDecision d = controller.step(t_star, x);
    solve_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    tr.t.push_back(t);
    tr.i_abc.push_back(inverse_clarke(x.current()));
    tr.ref_abc.push_back(inverse_clarke(controller.last_state().segment<2>(layout::kOsc)));
    tr.u.push_back(d.u_sw);
    tr.f_hat.push_back(controller.f_hat());
    tr.torque.push_back(torque(x, params));
    tr.t_star.push_back(t_star);

    x = step_plant(x, d.u_sw, dm);
    if (!x.x.allFinite() || x.x.norm() > scenario.sanity_limit)
      throw StateBlowUp("plant state left the sanity region at step " + std::to_string(k), k);
  }
  if (mean_solve_us) *mean_solve_us = 1e6 * solve_seconds / static_cast<double>(n);
  return tr;
}

namespace {

// Final value a torque step settles to: mean torque over the last period
// before the next step (or the end of the run).
double settled_value(const Trace& tr, double t_begin, double t_end, int spp) {
  std::size_t hi = 0;
  while (hi < tr.size() && tr.t[hi] < t_end) ++hi;
  const std::size_t lo = hi >= static_cast<std::size_t>(spp) ? hi - static_cast<std::size_t>(spp) : 0;
  double s = 0.0;
  std::size_t cnt = 0;
  for (std::size_t k = lo; k < hi; ++k) {
    if (tr.t[k] < t_begin) continue;
    s += tr.torque[k];
    ++cnt;
  }
  return cnt ? s / static_cast<double>(cnt) : 0.0;
}

}  // namespace

RunMetrics compute_metrics(const Trace& tr, const Scenario& scenario, const PerUnitParams& params) {
  const int spp = scenario.samples_per_period(params);
  const std::size_t w0 = static_cast<std::size_t>(scenario.warmup_periods) * spp;
  const std::size_t w1 = static_cast<std::size_t>(scenario.periods) * spp;
  if (tr.size() != w1) throw std::invalid_argument("trace length does not match the scenario");
  const int win_periods = scenario.periods - scenario.warmup_periods;

  RunMetrics m;
  m.thd_defined = true;
  for (int ph = 0; ph < 3; ++ph) {
    std::vector<double> sig;
    sig.reserve(w1 - w0);
    for (std::size_t k = w0; k < w1; ++k) sig.push_back(tr.i_abc[k][ph]);
    const ThdResult r = compute_thd(sig, win_periods);
    m.thd_phase[static_cast<std::size_t>(ph)] = r.thd_percent;
    m.thd_defined = m.thd_defined && r.defined;
  }
  m.thd_mean = (m.thd_phase[0] + m.thd_phase[1] + m.thd_phase[2]) / 3.0;

  std::vector<SwitchPosition> u;
  u.reserve(w1 - w0 + 1);
  u.push_back(w0 == 0 ? tr.u_initial : tr.u[w0 - 1]);
  for (std::size_t k = w0; k < w1; ++k) u.push_back(tr.u[k]);
  m.fsw_measured = compute_fsw(u, params.Ts);
  m.fsw_filter_final = tr.f_hat.back();

  for (std::size_t k = w0; k < w1; ++k)
    m.max_current_error = std::max(m.max_current_error, (tr.i_abc[k] - tr.ref_abc[k]).cwiseAbs().maxCoeff());

  SwitchPosition prev = tr.u_initial;
  for (const auto& s : tr.u) {
    for (int ph = 0; ph < 3; ++ph) m.max_phase_jump = std::max<long>(m.max_phase_jump, std::abs(s[ph] - prev[ph]));
    prev = s;
  }

  const double duration = static_cast<double>(w1) * params.Ts;
  for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
    const double ts = scenario.steps[i].time;
    const double te = i + 1 < scenario.steps.size() ? scenario.steps[i + 1].time : duration;
    const double target = settled_value(tr, ts, te, spp);
    // Only the part of the trace before the next step counts.
    std::vector<double> t, q;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      if (tr.t[k] < ts - 0.5 * params.Ts || tr.t[k] >= te - 0.5 * params.Ts) continue;
      t.push_back(tr.t[k]);
      q.push_back(tr.torque[k]);
    }
    const auto st = ripple_settling_time(t, q, t.front(), target, scenario.settling_band, spp / 20);
    m.settling_ms.push_back(st ? std::optional<double>(1e3 * *st) : std::nullopt);
  }
  return m;
}

void write_trace_csv(const Trace& tr, const std::string& fingerprint, std::ostream& os) {
  os << "# fingerprint " << fingerprint << "\n";
  os << "t,ia,ib,ic,ia_ref,ib_ref,ic_ref,ua,ub,uc,fsw_hat,torque\n";
  os << std::setprecision(10);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << tr.t[k];
    for (int ph = 0; ph < 3; ++ph) os << ',' << tr.i_abc[k][ph];
    for (int ph = 0; ph < 3; ++ph) os << ',' << tr.ref_abc[k][ph];
    for (int ph = 0; ph < 3; ++ph) os << ',' << tr.u[k][ph];
    os << ',' << tr.f_hat[k] << ',' << tr.torque[k] << '\n';
  }
}

void write_metrics(const RunMetrics& m, const Scenario& scenario, const std::string& label,
                   const std::string& fingerprint, std::ostream& os) {
  os << "# fingerprint " << fingerprint << "\n";
  os << std::setprecision(6);
  os << "run " << label << "\n";
  os << "periods " << scenario.periods << "\n";
  os << "warmup_periods " << scenario.warmup_periods << "\n";
  if (m.thd_defined) {
    os << "thd_a_percent " << m.thd_phase[0] << "\n";
    os << "thd_b_percent " << m.thd_phase[1] << "\n";
    os << "thd_c_percent " << m.thd_phase[2] << "\n";
    os << "thd_mean_percent " << m.thd_mean << "\n";
  } else {
    os << "thd_mean_percent undefined\n";
  }
  os << "fsw_measured_hz " << m.fsw_measured << "\n";
  os << "fsw_filter_final_hz " << m.fsw_filter_final << "\n";
  os << "max_current_error_pu " << m.max_current_error << "\n";
  os << "max_phase_jump " << m.max_phase_jump << "\n";
  for (std::size_t i = 0; i < m.settling_ms.size(); ++i) {
    os << "settling_ms_step" << i << ' ';
    if (m.settling_ms[i]) os << *m.settling_ms[i] << "\n";
    else os << "not-settled\n";
  }
}

}  // namespace adpmpc

#include "adpmpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace adpmpc {

double dft_amplitude(const std::vector<double>& signal, int bin) {
  const std::size_t n = signal.size();
  if (n == 0) throw std::invalid_argument("empty signal");
  std::complex<double> acc = 0.0;
  const double w = -2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    // Reduce the phase index first to keep the angle small and exact.
    const auto idx = static_cast<double>((static_cast<std::size_t>(bin) * k) % n);
    acc += signal[k] * std::polar(1.0, w * idx);
  }
  const double scale = (bin == 0 || 2 * static_cast<std::size_t>(bin) == n) ? 1.0 : 2.0;
  return scale * std::abs(acc) / static_cast<double>(n);
}

ThdResult compute_thd(const std::vector<double>& signal, int periods) {
  if (periods < 1) throw std::invalid_argument("window must span at least one period");
  const std::size_t n = signal.size();
  if (n < 2 * static_cast<std::size_t>(periods) + 1) throw std::invalid_argument("window too short for its period count");
  if (n % static_cast<std::size_t>(periods) != 0)
    throw std::invalid_argument("window must hold an integer number of periods");
  double energy = 0.0;
  for (double x : signal) energy += x * x;
  // Mean square = sum over one-sided bins of amplitude^2 / 2 (DC: amplitude^2).
  const double mean_square = energy / static_cast<double>(n);
  ThdResult r;
  r.fundamental = dft_amplitude(signal, periods);
  const double fund_ms = 0.5 * r.fundamental * r.fundamental;
  if (fund_ms <= 1e-12 * std::max(mean_square, 1e-300) || r.fundamental < 1e-12) return r;
  r.defined = true;
  r.thd_percent = 100.0 * std::sqrt(std::max(0.0, mean_square - fund_ms) / fund_ms);
  return r;
}

double compute_fsw(const std::vector<SwitchPosition>& u, double ts) {
  if (u.size() < 2) throw std::invalid_argument("need at least one transition");
  if (!(ts > 0.0)) throw std::invalid_argument("sampling period must be positive");
  long total = 0;
  for (std::size_t k = 1; k < u.size(); ++k)
    for (int ph = 0; ph < 3; ++ph) total += std::abs(u[k][ph] - u[k - 1][ph]);
  return static_cast<double>(total) / (12.0 * static_cast<double>(u.size() - 1) * ts);
}

std::optional<double> settling_time(const std::vector<double>& t, const std::vector<double>& signal, double t_step,
                                    double target, double band) {
  if (t.size() != signal.size()) throw std::invalid_argument("time and signal lengths differ");
  if (t.empty() || t_step < t.front() || t_step > t.back()) throw std::invalid_argument("step outside the trace");
  // Last sample after the step that lies outside the band.
  std::optional<std::size_t> last_out;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_step) continue;
    if (std::abs(signal[k] - target) > band) last_out = k;
  }
  if (!last_out) return 0.0;
  if (*last_out + 1 >= t.size()) return std::nullopt;
  return t[*last_out + 1] - t_step;
}

std::optional<double> band_entry_time(const std::vector<double>& t, const std::vector<double>& signal, double t_step,
                                      double target, double band) {
  if (t.size() != signal.size()) throw std::invalid_argument("time and signal lengths differ");
  if (t.empty() || t_step < t.front() || t_step > t.back()) throw std::invalid_argument("step outside the trace");
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= t_step && std::abs(signal[k] - target) <= band) return t[k] - t_step;
  return std::nullopt;
}

std::optional<double> ripple_settling_time(const std::vector<double>& t, const std::vector<double>& signal,
                                           double t_step, double target, double band, int width) {
  const auto smooth = settling_time(t, moving_average(signal, width), t_step, target, band);
  if (!smooth) return std::nullopt;
  const auto entry = band_entry_time(t, signal, t_step, target, band);
  if (!entry) return std::nullopt;
  return std::max(*entry, *smooth);
}

std::vector<double> moving_average(const std::vector<double>& x, int width) {
  if (width < 1) throw std::invalid_argument("width must be positive");
  const long n = static_cast<long>(x.size());
  const long h = width / 2;
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (long k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + x[k];
  std::vector<double> out(x.size());
  for (long k = 0; k < n; ++k) {
    const long lo = std::max(0L, k - h), hi = std::min(n, k - h + width);
    out[k] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace adpmpc

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adpmpc/metrics.hpp"

using namespace adpmpc;

namespace {

std::vector<double> sampled(int periods, int spp, double (*f)(double)) {
  std::vector<double> x(static_cast<std::size_t>(periods * spp));
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = f(2.0 * M_PI * static_cast<double>(k) / spp);
  return x;
}

}  // namespace

TEST_CASE("pure sinusoid has no distortion") {
  const auto x = sampled(20, 800, [](double th) { return 0.8 * std::sin(th + 0.3); });
  const ThdResult r = compute_thd(x, 20);
  CHECK(r.defined);
  CHECK(r.fundamental == doctest::Approx(0.8).epsilon(1e-12));
  // Parseval subtraction leaves a floor of about sqrt(eps) in relative terms.
  CHECK(r.thd_percent < 1e-5);
}

TEST_CASE("fifth harmonic") {
  const auto x = sampled(20, 800, [](double th) { return std::sin(th) + 0.05 * std::sin(5.0 * th); });
  const ThdResult r = compute_thd(x, 20);
  CHECK(r.thd_percent == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(dft_amplitude(x, 100) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(dft_amplitude(x, 40) < 1e-12);

  // DC and inter-harmonics count as distortion, rms against the fundamental rms.
  auto y = sampled(20, 800, [](double th) { return std::sin(th) + 0.03 + 0.04 * std::sin(2.5 * th); });
  CHECK(compute_thd(y, 20).thd_percent == doctest::Approx(100.0 * std::sqrt(2.0 * 0.03 * 0.03 + 0.04 * 0.04)).epsilon(1e-9));
}

TEST_CASE("square wave against the sampled closed form") {
  const int spp = 800;
  std::vector<double> x;
  for (int p = 0; p < 4; ++p)
    for (int k = 0; k < spp; ++k) x.push_back(k < spp / 2 ? 1.0 : -1.0);
  // Fundamental of the sampled square wave: 4 / (spp sin(pi/spp)).
  const double a1 = 4.0 / (spp * std::sin(M_PI / spp));
  const double expect = 100.0 * std::sqrt(1.0 - a1 * a1 / 2.0) / (a1 / std::sqrt(2.0));
  const ThdResult r = compute_thd(x, 4);
  CHECK(r.fundamental == doctest::Approx(a1).epsilon(1e-12));
  CHECK(r.thd_percent == doctest::Approx(expect).epsilon(1e-9));
  CHECK(r.thd_percent == doctest::Approx(48.34).epsilon(1e-3));
}

TEST_CASE("distortion undefined without a fundamental") {
  const std::vector<double> zero(1600, 0.0);
  CHECK_FALSE(compute_thd(zero, 2).defined);
  CHECK_THROWS_AS(compute_thd(std::vector<double>(1601, 1.0), 2), std::invalid_argument);
  CHECK_THROWS_AS(compute_thd({}, 1), std::invalid_argument);
}

TEST_CASE("switching frequency") {
  // One unit level change per 25 us sample: 1 / (12 * 25e-6) Hz per device.
  std::vector<SwitchPosition> u{{0, 0, 0}};
  for (int k = 0; k < 300; ++k) {
    const int ph = k % 3;
    SwitchPosition next = u.back();
    const int v = next[ph] == 0 ? 1 : 0;
    next = ph == 0 ? SwitchPosition(v, next[1], next[2])
                   : ph == 1 ? SwitchPosition(next[0], v, next[2]) : SwitchPosition(next[0], next[1], v);
    u.push_back(next);
  }
  CHECK(compute_fsw(u, 25e-6) == doctest::Approx(3333.333333).epsilon(1e-9));
  const std::vector<SwitchPosition> idle(100, SwitchPosition(1, 0, -1));
  CHECK(compute_fsw(idle, 25e-6) == 0.0);
  CHECK_THROWS_AS(compute_fsw({SwitchPosition()}, 25e-6), std::invalid_argument);
  CHECK_THROWS_AS(compute_fsw(idle, 0.0), std::invalid_argument);
}

TEST_CASE("settling time") {
  std::vector<double> t, y;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.001 * k);
    y.push_back(1.0 - std::exp(-static_cast<double>(k) / 10.0));
  }
  // Stays within 0.05 once k/10 >= ln 20, i.e. from k = 30.
  const auto s = settling_time(t, y, 0.0, 1.0, 0.05);
  REQUIRE(s);
  CHECK(*s == doctest::Approx(0.030));
  CHECK(*band_entry_time(t, y, 0.0, 1.0, 0.05) == doctest::Approx(0.030));
  // Already settled.
  CHECK(*settling_time(t, y, 0.05, 1.0, 0.05) == 0.0);
  // Never settles: the last sample is outside.
  y.back() = 2.0;
  CHECK_FALSE(settling_time(t, y, 0.0, 1.0, 0.05));
  CHECK_THROWS_AS(settling_time(t, y, 0.5, 1.0, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(settling_time(t, std::vector<double>(3, 0.0), 0.0, 1.0, 0.05), std::invalid_argument);
}

TEST_CASE("moving average") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto a = moving_average(x, 3);
  CHECK(a == std::vector<double>{1.5, 2, 3, 4, 4.5});
  const auto b = moving_average(x, 2);  // window [k-1, k]
  CHECK(b == std::vector<double>{1, 1.5, 2.5, 3.5, 4.5});
  CHECK(moving_average(x, 1) == x);
  CHECK_THROWS_AS(moving_average(x, 0), std::invalid_argument);
}

TEST_CASE("settling time on a rippled signal") {
  // First-order approach with a ripple larger than the band that averages out
  // over the window.
  const double dt = 1e-5, tau = 1e-3;
  const int width = 40;
  std::vector<double> t, y;
  for (int k = 0; k < 1000; ++k) {
    t.push_back(k * dt);
    y.push_back(1.0 - std::exp(-k * dt / tau) + 0.08 * std::sin(2.0 * M_PI * k / width));
  }
  // On the raw signal the ripple keeps leaving the band until the trace end.
  CHECK(*settling_time(t, y, 0.0, 1.0, 0.05) > 0.009);
  const auto s = ripple_settling_time(t, y, 0.0, 1.0, 0.05, width);
  REQUIRE(s);
  // The window mean of the exponential lags the sample by half a step and is
  // scaled by sinh(x)/x with x = width dt / (2 tau).
  const double x = width * dt / (2.0 * tau);
  const double expect = tau * (std::log(20.0) + std::log(std::sinh(x) / x)) + 0.5 * dt;
  CHECK(std::abs(*s - expect) <= dt);
  // The raw entry dominates when the mean settles first.
  std::vector<double> late = y;
  for (int k = 0; k < 500; ++k) late[static_cast<std::size_t>(k)] = 0.0;
  const auto s2 = ripple_settling_time(t, late, 0.0, 1.0, 0.05, width);
  REQUIRE(s2);
  CHECK(*s2 >= *band_entry_time(t, late, 0.0, 1.0, 0.05));
  // A mean that never reaches the band is not settled.
  CHECK_FALSE(ripple_settling_time(t, std::vector<double>(1000, 0.5), 0.0, 1.0, 0.05, width));
}

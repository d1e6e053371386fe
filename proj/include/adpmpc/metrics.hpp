#pragma once

#include <optional>
#include <vector>

#include "adpmpc/perunit.hpp"

namespace adpmpc {

struct ThdResult {
  double thd_percent = 0.0;
  double fundamental = 0.0;  // amplitude of the fundamental bin
  bool defined = false;      // false when the fundamental vanishes
};

/// Harmonic distortion of a window holding exactly `periods` fundamental
/// periods: every spectral bin except the fundamental (DC and
/// inter-harmonics included) relative to the fundamental. The bin sum is
/// taken through Parseval's identity.
ThdResult compute_thd(const std::vector<double>& signal, int periods);

/// Amplitude of DFT bin `bin`, for spectra and tests.
double dft_amplitude(const std::vector<double>& signal, int bin);

/// Average device switching frequency: sum of ||u(k) - u(k-1)||_1 over the
/// window, divided by 12 and by the window duration. `u` includes the switch
/// position preceding the window, so it has one more entry than the window.
double compute_fsw(const std::vector<SwitchPosition>& u, double ts);

/// Time from `t_step` until `signal` stays within `band` of `target` for the
/// rest of the trace; nullopt if it never does.
std::optional<double> settling_time(const std::vector<double>& t, const std::vector<double>& signal, double t_step,
                                    double target, double band);

/// First time from `t_step` at which `signal` lies within `band` of
/// `target`; nullopt if it never does.
std::optional<double> band_entry_time(const std::vector<double>& t, const std::vector<double>& signal, double t_step,
                                      double target, double band);

/// Settling time of a signal carrying switching ripple larger than the band:
/// the later of the first entry of the raw signal into the band and the time
/// from which its local mean (centered average over `width` samples, which
/// has no lag) stays inside it. nullopt if the local mean never settles.
std::optional<double> ripple_settling_time(const std::vector<double>& t, const std::vector<double>& signal,
                                           double t_step, double target, double band, int width);

/// Centered moving average over `width` samples (shrinking at the ends).
std::vector<double> moving_average(const std::vector<double>& x, int width);

}  // namespace adpmpc

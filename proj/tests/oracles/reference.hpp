#pragma once

// Independent reference evaluations used by the tests. Written against the
// physical definitions directly, without calling into the library.

#include <cmath>
#include <complex>

namespace oracle {

inline constexpr double h = 6.62607015e-34;
inline constexpr double kb = 1.380649e-23;
inline constexpr double phi0 = 2.067833848e-15;
inline const double pi = std::acos(-1.0);

/// (1/2) coth(h f / 2 k T) in extended precision.
inline double johnson(double t, double f) {
  const long double x = static_cast<long double>(h) * f / (2.0L * kb * t);
  return static_cast<double>(0.5L * std::cosh(x) / std::sinh(x));
}

/// High-temperature expansion k T / h f + h f / (12 k T).
inline double johnson_series(double t, double f) {
  const double r = kb * t / (h * f);
  return r + 1.0 / (12.0 * r);
}

inline double josephson_inductance(double jc_a_per_cm2, double area_um2) {
  return phi0 / (2.0 * pi * jc_a_per_cm2 * 1e4 * area_um2 * 1e-12);
}

inline double lc_frequency(double l, double c) { return 1.0 / (2.0 * pi * std::sqrt(l * c)); }

/// Lossless one-port Lorentzian |S11|^2 with detuning in Hz.
inline double lorentz_power(double f0, double ke, double ki, double f) {
  const std::complex<double> num(0.5 * (ke - ki), f - f0);
  const std::complex<double> den(0.5 * (ke + ki), -(f - f0));
  return std::norm(num / den);
}

/// Stark shift chi Re{conj(a_e) a_g} written out from the two cavity responses.
inline double stark(double dr, double kappa, double chi, double eps) {
  const std::complex<double> j(0.0, 1.0);
  const auto ag = -j * eps / (kappa / 2.0 + j * dr);
  const auto ae = -j * eps / (kappa / 2.0 + j * (dr - chi));
  return chi * (std::conj(ae) * ag).real();
}

}  // namespace oracle

#pragma once

#include <cmath>
#include <numbers>

namespace wjpa {
namespace constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double planck = 6.62607015e-34;          // J s
inline constexpr double hbar = planck / (2.0 * pi);       // J s
inline constexpr double boltzmann = 1.380649e-23;         // J/K
inline constexpr double flux_quantum = 2.067833848e-15;   // Wb
inline constexpr double speed_of_light = 299792458.0;     // m/s

}  // namespace constants

// Power conversions. All powers in the library are watts; dBm only appears at
// the file and CLI boundary.
template <typename Scalar>
Scalar dbm_to_watt(Scalar dbm) {
  return std::pow(Scalar(10), (dbm - Scalar(30)) / Scalar(10));
}

template <typename Scalar>
Scalar watt_to_dbm(Scalar watt) {
  return Scalar(10) * std::log10(watt) + Scalar(30);
}

template <typename Scalar>
Scalar db_to_linear(Scalar db) {
  return std::pow(Scalar(10), db / Scalar(10));
}

template <typename Scalar>
Scalar linear_to_db(Scalar ratio) {
  return Scalar(10) * std::log10(ratio);
}

template <typename Scalar>
constexpr Scalar angular(Scalar hz) {
  return Scalar(2.0 * constants::pi) * hz;
}

}  // namespace wjpa

#pragma once

// Linear reflection of a one-port resonator, its fit, and single-pump
// four-wave-mixing gain of a Kerr resonator.
//
// Conventions: LinearMode rates are in Hz (kappa / 2 pi). Field amplitudes follow
// e^{-i w t}; the output is a_out = sqrt(kappa_ext) a - a_in. The Kerr constant
// K is the per-photon frequency shift (rad/s), negative for the SQUID
// resonator, so intracavity photons pull the resonance down to w0 + K n.

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wjpa/circuit.hpp"
#include "wjpa/constants.hpp"
#include "wjpa/trace.hpp"

namespace wjpa {

struct LinearMode {
  double f_res = 0.0;
  double kappa_ext = 0.0;
  double kappa_int = 0.0;

  double kappa() const { return kappa_ext + kappa_int; }
  double loaded_q() const { return f_res / kappa(); }
  void validate() const;
};

/// Complex affine background: (amp0 + amp_slope x) exp(i (phase0 + phase_slope x)),
/// x = f - f_center.
struct BackgroundModel {
  double f_center = 0.0;
  double amp0 = 1.0;
  double amp_slope = 0.0;    // 1/Hz
  double phase0 = 0.0;       // rad
  double phase_slope = 0.0;  // rad/Hz

  std::complex<double> operator()(double f_hz) const {
    const double x = f_hz - f_center;
    return std::polar(amp0 + amp_slope * x, phase0 + phase_slope * x);
  }
};

template <typename Scalar>
std::complex<Scalar> linear_s11(const LinearMode& mode, Scalar f_hz) {
  using C = std::complex<Scalar>;
  const Scalar detuning = f_hz - Scalar(mode.f_res);
  const C num(Scalar(0.5) * Scalar(mode.kappa_ext - mode.kappa_int), detuning);
  const C den(Scalar(0.5) * Scalar(mode.kappa_ext + mode.kappa_int), -detuning);
  return num / den;
}

struct ReflectionFit {
  LinearMode mode;
  BackgroundModel background;
  double residual = 0.0;  // RMS complex misfit
  /// True when the trace winds the opposite way (e^{+j w t} instrument data);
  /// the model is then conj(linear_s11).
  bool conjugate = false;
};

/// Least-squares fit of background x linear_s11. Without a guess the resonance
/// is located from the fastest motion of the trace in the complex plane.
ReflectionFit fit_reflection(const ComplexTrace& trace, std::optional<LinearMode> guess = std::nullopt);

/// Centre and linewidth estimate from a coarse trace (max |dS/df|).
std::pair<double, double> locate_resonance(const ComplexTrace& trace);

struct FluxMapOptions {
  double scan_lo_hz = 2e9;
  double scan_hi_hz = 40e9;
  Eigen::Index scan_points = 9501;
  Eigen::Index fit_points = 801;
  double fit_half_span_linewidths = 6.0;
};

struct FluxPoint {
  double flux = 0.0;
  double l_j = 0.0;
  std::optional<LinearMode> mode;
  double residual = 0.0;
  std::string error;
};

/// squid_inductance -> reflection_from_circuit -> fit_reflection at each flux.
/// Per-point failures are recorded, not thrown.
std::vector<FluxPoint> flux_map(const DeviceCircuit& circuit, std::span<const double> flux_grid,
                                const FluxMapOptions& options = {});

enum class Branch { low, high };

struct PumpSetting {
  double f_pump = 0.0;   // Hz
  double power_w = 0.0;  // at the device port
};

struct PumpOperatingPoint {
  double f_pump = 0.0;
  double power_w = 0.0;
  double n_p = 0.0;
  double delta_p = 0.0;  // w_p - w0, rad/s
  Branch branch = Branch::low;
  std::vector<double> roots;  // all non-negative real roots, ascending
};

/// Intracavity pump photons from n [(kappa/2)^2 + (delta_p - K n)^2] = kappa_ext P / (hbar w_p).
PumpOperatingPoint pump_steady_state(const LinearMode& mode, double kerr, const PumpSetting& pump,
                                     Branch branch = Branch::low);

/// Residual of the steady-state cubic relative to its drive term.
double pump_residual(const LinearMode& mode, double kerr, const PumpOperatingPoint& op);

struct SignalGain {
  double signal = 0.0;
  double idler = 0.0;
  std::complex<double> s_ss;
  std::complex<double> s_si;
};

/// Linearized gain at signal detuning `delta` (rad/s, from the pump).
/// `extra_photons` adds to the Kerr detuning only (mean-field signal back-action).
SignalGain small_signal_gain(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, double delta,
                             double extra_photons = 0.0);

/// True when the linearized dynamics have an eigenvalue with positive real part.
bool is_unstable(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, double extra_photons = 0.0);

struct GainResult {
  Eigen::VectorXd freq_hz;
  Eigen::VectorXd gain;  // linear power gain
  double peak_gain = 0.0;
  double peak_freq = 0.0;
  double bandwidth_3db = 0.0;  // Hz, 0 when the half-power points are not inside the grid
};

GainResult gain_profile(const LinearMode& mode, double kerr, const PumpSetting& pump, const Eigen::VectorXd& grid_hz,
                        Branch branch = Branch::low);

/// Pump power at the given pump detuning (Hz, negative below resonance) that
/// yields `target_gain` (linear) at the pump frequency on the low branch.
PumpSetting tune_pump_for_gain(const LinearMode& mode, double kerr, double pump_detuning_hz, double target_gain);

struct P1dbOptions {
  double signal_offset_hz = 100e3;
  double scan_start_dbm = -200.0;
  double scan_stop_dbm = -40.0;
  double scan_step_db = 0.25;
};

struct P1dbResult {
  double p1db_w = 0.0;
  double small_signal_gain = 0.0;  // linear
};

/// Gain at a given signal input power with the self-consistent signal photon
/// number added to the Kerr detuning. `photons_hint` seeds the continuation.
double saturated_gain(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, double delta,
                      double signal_power_w, double* photons_hint = nullptr);

P1dbResult p1db(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, const P1dbOptions& options = {});

/// Ordinary least-squares slope of P_1dB (dBm) against pump power (dBm).
double p1db_slope(std::span<const std::pair<double, double>> series);

}  // namespace wjpa

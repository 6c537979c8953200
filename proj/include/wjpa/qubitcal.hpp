#pragma once

// Qubit as an absolute power meter: Stark shift of a dispersively coupled
// qubit, Ramsey phase extraction, and conversion of analyzer spectra to
// photon units, system noise temperature and measurement efficiency.

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <utility>

#include "wjpa/constants.hpp"
#include "wjpa/error.hpp"

namespace wjpa {

/// Angular rates throughout.
struct DispersiveDevice {
  double omega_r = 0.0;
  double omega_d = 0.0;
  double chi = 0.0;
  double kappa = 0.0;
  double tau = 0.0;  // Ramsey delay, s

  double delta_r() const { return omega_r - omega_d; }
  /// |delta_r| > 10 max(kappa, |chi|)
  bool far_detuned() const;
  void validate() const;
};

/// Steady-state cavity amplitudes with the qubit in g and in e.
std::pair<std::complex<double>, std::complex<double>> cavity_amplitudes(const DispersiveDevice& dev, double eps_d);

/// chi Re{conj(alpha_e) alpha_g}, rad/s.
double stark_shift(const DispersiveDevice& dev, double eps_d);

/// Stark shift per |eps_d|^2.
double stark_response(const DispersiveDevice& dev);

struct RamseyFringe {
  Eigen::VectorXd theta;
  Eigen::VectorXd signal;

  void validate() const;
};

struct RamseyFit {
  double dphi = 0.0;      // (-pi, pi]
  double contrast = 0.0;  // amplitude A
  double offset = 0.0;
  double noise_rms = 0.0;
};

/// signal = A cos(theta + dphi) + B by linear least squares on (cos, sin, 1).
RamseyFit ramsey_phase(const RamseyFringe& fringe);

/// Nearest-branch continuation of a phase series.
Eigen::VectorXd unwrap_phases(const Eigen::VectorXd& phases);

struct StarkCalibration {
  double dphase_dp = 0.0;      // rad / W at room temperature
  double dshift_dp = 0.0;      // rad/s / W
  double intercept = 0.0;      // rad/s
  double residual_rms = 0.0;   // rad/s
  std::optional<double> p_ratio;  // cavity-plane / room-temperature power
  std::optional<double> g_sys_db;
  bool far_detuned = true;
  Eigen::VectorXd dphi_unwrapped;
};

struct StarkOptions {
  double nonlinearity_tolerance = 0.05;  // residual RMS / max |shift|
  /// (room-temperature drive W, analyzer output W) measured together; sets g_sys_db.
  std::optional<std::pair<double, double>> output_reference;
};

/// `series` holds (P_RT W, dphi rad) pairs in order of increasing power.
StarkCalibration stark_power_calibration(const DispersiveDevice& dev, std::span<const std::pair<double, double>> series,
                                         const StarkOptions& options = {});

/// 10 log10(P_RT_out / P_cavity).
double system_gain_db(double p_rt_out_w, double p_cavity_w);

/// N = P_SA / (G_sys hbar omega_d r_bw).
Eigen::VectorXd spectrum_to_quanta(const Eigen::VectorXd& p_sa_w, double g_sys_db, double omega_d, double rbw_hz);
Eigen::VectorXd quanta_to_spectrum(const Eigen::VectorXd& quanta, double g_sys_db, double omega_d, double rbw_hz);

/// T_sys = N h f / k_B.
double noise_temperature(double n_sys, double f_hz);

/// eta = h f / (k_B T_sys). Not clamped to 1.
double efficiency(double t_sys_k, double f_hz);

}  // namespace wjpa

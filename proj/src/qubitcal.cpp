#include "wjpa/qubitcal.hpp"

#include <algorithm>
#include <cmath>

namespace wjpa {
namespace {

using cd = std::complex<double>;
using namespace std::complex_literals;

constexpr Eigen::Index kMinFringePoints = 8;
constexpr std::size_t kMinPowers = 3;

double conversion(double g_sys_db, double omega_d, double rbw_hz) {
  detail::require_positive(omega_d, "drive frequency");
  detail::require_positive(rbw_hz, "resolution bandwidth");
  return db_to_linear(g_sys_db) * constants::hbar * omega_d * rbw_hz;
}

}  // namespace

bool DispersiveDevice::far_detuned() const { return std::abs(delta_r()) > 10.0 * std::max(kappa, std::abs(chi)); }

void DispersiveDevice::validate() const {
  detail::require_positive(kappa, "kappa");
  detail::require_positive(tau, "tau");
  detail::require_positive(omega_d, "omega_d");
}

std::pair<cd, cd> cavity_amplitudes(const DispersiveDevice& dev, double eps_d) {
  dev.validate();
  const double dr = dev.delta_r();
  const cd ag = -1i * eps_d / (0.5 * dev.kappa + 1i * dr);
  const cd ae = -1i * eps_d / (0.5 * dev.kappa + 1i * (dr - dev.chi));
  return {ag, ae};
}

double stark_shift(const DispersiveDevice& dev, double eps_d) {
  const auto [ag, ae] = cavity_amplitudes(dev, eps_d);
  return dev.chi * (std::conj(ae) * ag).real();
}

double stark_response(const DispersiveDevice& dev) {
  dev.validate();
  const double dr = dev.delta_r();
  return dev.chi * (1.0 / ((0.5 * dev.kappa - 1i * (dr - dev.chi)) * (0.5 * dev.kappa + 1i * dr))).real();
}

void RamseyFringe::validate() const {
  detail::require(theta.size() == signal.size(), ErrorCode::InvalidArgument, "fringe lengths differ");
  detail::require(theta.size() >= kMinFringePoints, ErrorCode::InvalidArgument, "fringe needs at least 8 points");
  detail::require(theta.allFinite() && signal.allFinite(), ErrorCode::InvalidArgument, "fringe has non-finite samples");
}

RamseyFit ramsey_phase(const RamseyFringe& fringe) {
  fringe.validate();
  const Eigen::Index n = fringe.theta.size();
  Eigen::MatrixXd design(n, 3);
  design.col(0) = fringe.theta.array().cos();
  design.col(1) = fringe.theta.array().sin();
  design.col(2).setOnes();
  const Eigen::Vector3d c = design.colPivHouseholderQr().solve(fringe.signal);
  // A cos(t + d) = A cos d cos t - A sin d sin t
  RamseyFit fit;
  fit.contrast = std::hypot(c(0), c(1));
  fit.offset = c(2);
  fit.noise_rms = std::sqrt((fringe.signal - design * c).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(n - 3, 1)));
  const double floor = std::max(3.0 * fit.noise_rms * std::sqrt(2.0 / static_cast<double>(n)),
                                1e-12 * std::max(1.0, std::abs(fit.offset)));
  if (!(fit.contrast > floor)) throw Error(ErrorCode::LowContrast, "fringe amplitude below the noise floor");
  fit.dphi = std::atan2(-c(1), c(0));
  if (fit.dphi <= -constants::pi) fit.dphi = constants::pi;
  return fit;
}

Eigen::VectorXd unwrap_phases(const Eigen::VectorXd& phases) {
  Eigen::VectorXd out = phases;
  const double two_pi = 2.0 * constants::pi;
  for (Eigen::Index i = 1; i < out.size(); ++i) {
    out(i) += two_pi * std::round((out(i - 1) - out(i)) / two_pi);
  }
  return out;
}

StarkCalibration stark_power_calibration(const DispersiveDevice& dev, std::span<const std::pair<double, double>> series,
                                         const StarkOptions& options) {
  dev.validate();
  if (series.size() < kMinPowers) throw Error(ErrorCode::InvalidArgument, "calibration needs at least 3 powers");
  const auto n = static_cast<Eigen::Index>(series.size());
  Eigen::VectorXd p(n), phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = series[static_cast<std::size_t>(i)].first;
    phi(i) = series[static_cast<std::size_t>(i)].second;
    detail::require(p(i) >= 0.0, ErrorCode::InvalidArgument, "drive power must be >= 0");
  }
  detail::require(p.maxCoeff() > p.minCoeff(), ErrorCode::InvalidArgument, "drive powers must not all be equal");

  StarkCalibration cal;
  cal.far_detuned = dev.far_detuned();
  cal.dphi_unwrapped = unwrap_phases(phi);
  const Eigen::VectorXd shift = cal.dphi_unwrapped / dev.tau;

  Eigen::MatrixXd design(n, 2);
  design.col(0) = p;
  design.col(1).setOnes();
  const Eigen::Vector2d c = design.colPivHouseholderQr().solve(shift);
  cal.dshift_dp = c(0);
  cal.intercept = c(1);
  cal.dphase_dp = c(0) * dev.tau;
  cal.residual_rms = std::sqrt((shift - design * c).squaredNorm() / static_cast<double>(n));

  const double scale = shift.cwiseAbs().maxCoeff();
  if (scale > 0.0 && cal.residual_rms > options.nonlinearity_tolerance * scale) {
    throw Error(ErrorCode::NonlinearStark, "Stark shift is not linear in drive power");
  }

  const double response = stark_response(dev);
  if (cal.dshift_dp != 0.0 && response != 0.0) {
    const double eps2_per_watt = cal.dshift_dp / response;
    const double ratio = constants::hbar * dev.omega_d * eps2_per_watt / (dev.kappa);
    if (ratio > 0.0) cal.p_ratio = ratio;
  }
  if (cal.p_ratio && options.output_reference) {
    const auto [p_rt_in, p_rt_out] = *options.output_reference;
    cal.g_sys_db = system_gain_db(p_rt_out, *cal.p_ratio * p_rt_in);
  }
  return cal;
}

double system_gain_db(double p_rt_out_w, double p_cavity_w) {
  detail::require_positive(p_rt_out_w, "output power");
  detail::require_positive(p_cavity_w, "cavity power");
  return linear_to_db(p_rt_out_w / p_cavity_w);
}

Eigen::VectorXd spectrum_to_quanta(const Eigen::VectorXd& p_sa_w, double g_sys_db, double omega_d, double rbw_hz) {
  detail::require((p_sa_w.array() >= 0.0).all(), ErrorCode::InvalidArgument, "spectrum power must be >= 0");
  return p_sa_w / conversion(g_sys_db, omega_d, rbw_hz);
}

Eigen::VectorXd quanta_to_spectrum(const Eigen::VectorXd& quanta, double g_sys_db, double omega_d, double rbw_hz) {
  detail::require((quanta.array() >= 0.0).all(), ErrorCode::InvalidArgument, "quanta must be >= 0");
  return quanta * conversion(g_sys_db, omega_d, rbw_hz);
}

double noise_temperature(double n_sys, double f_hz) {
  detail::require_positive(n_sys, "N_sys");
  detail::require_positive(f_hz, "frequency");
  return n_sys * constants::planck * f_hz / constants::boltzmann;
}

double efficiency(double t_sys_k, double f_hz) {
  detail::require_positive(t_sys_k, "T_sys");
  detail::require_positive(f_hz, "frequency");
  return constants::planck * f_hz / (constants::boltzmann * t_sys_k);
}

}  // namespace wjpa

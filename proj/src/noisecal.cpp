#include "wjpa/noisecal.hpp"

#include <cmath>
#include <limits>

namespace wjpa {
namespace {

constexpr Eigen::Index kMinTemperatures = 3;
constexpr double kMinInputSpan = 0.5;

}  // namespace

double johnson_quanta(double t_k, double f_hz) {
  detail::require(t_k >= 0.0, ErrorCode::InvalidArgument, "temperature must be >= 0");
  detail::require_positive(f_hz, "frequency");
  if (t_k == 0.0) return 0.5;
  const double x = constants::planck * f_hz / (constants::boltzmann * t_k);
  return 0.5 + 1.0 / std::expm1(x);
}

void ChainStage::validate() const {
  detail::require_positive(gain, "stage gain");
  detail::require(added_noise >= 0.0, ErrorCode::InvalidArgument, "stage added noise must be >= 0");
}

ChainTotals friis_chain(std::span<const ChainStage> stages) {
  detail::require(!stages.empty(), ErrorCode::InvalidArgument, "chain has no stages");
  ChainTotals out;
  for (const auto& s : stages) {
    s.validate();
    out.added_noise += s.added_noise / out.gain;
    out.gain *= s.gain;
  }
  return out;
}

void VtsSweepDataset::validate() const {
  const auto nt = temps.size();
  const auto nf = freqs.size();
  detail::require(nt > 0 && nf > 0, ErrorCode::InvalidArgument, "empty sweep");
  detail::require(noise.rows() == nt && noise.cols() == nf && gain.rows() == nt && gain.cols() == nf,
                  ErrorCode::InvalidArgument, "sweep matrices do not match temps x freqs");
  for (Eigen::Index i = 0; i < nt; ++i) {
    detail::require(temps(i) >= 0.0, ErrorCode::InvalidArgument, "negative temperature");
    if (i > 0) detail::require(temps(i) > temps(i - 1), ErrorCode::InvalidArgument, "temperatures must increase");
  }
  for (Eigen::Index j = 0; j < nf; ++j) detail::require_positive(freqs(j), "frequency");
  detail::require(rbw_hz >= 0.0, ErrorCode::InvalidArgument, "rbw must be >= 0");
}

Eigen::MatrixXd renormalize_noise(const VtsSweepDataset& data) {
  data.validate();
  if (!(data.gain.array() > 0.0).all()) throw Error(ErrorCode::NonPositiveGain, "WJPA gain must be positive");
  return data.noise.array() / data.gain.array();
}

YFactorFit yfactor_regression(std::span<const YFactorPoint> points, const YFactorOptions& options) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < kMinTemperatures) throw Error(ErrorCode::InsufficientSpan, "regression needs at least 3 points");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : points) {
    lo = std::min(lo, p.n_in);
    hi = std::max(hi, p.n_in);
    if (options.correction != Correction::none && !(p.wjpa_gain > 0.0)) {
      throw Error(ErrorCode::NonPositiveGain, "WJPA gain must be positive");
    }
  }
  if (hi - lo < kMinInputSpan) throw Error(ErrorCode::InsufficientSpan, "input noise spans less than 0.5 quanta");

  const bool per_point = options.correction == Correction::per_point && options.idler_folding;
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    design(i, 0) = p.n_in + (per_point ? options.n_rest / (2.0 * p.wjpa_gain) : 0.0);
    design(i, 1) = 1.0;
    y(i) = p.y;
    if (options.weighted) {
      detail::require(p.variance > 0.0, ErrorCode::InvalidArgument, "weighted regression needs positive variances");
      w(i) = 1.0 / p.variance;
    }
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::Vector2d coef = (sw.asDiagonal() * design).colPivHouseholderQr().solve(sw.asDiagonal() * y);

  YFactorFit fit;
  fit.slope = coef(0);
  fit.intercept = coef(1);
  if (!(fit.slope > 0.0)) throw Error(ErrorCode::NonPositiveGain, "regression slope is not positive");
  const Eigen::VectorXd resid = y - design * coef;
  const double mean = y.dot(w) / w.sum();
  const double ss_tot = (w.array() * (y.array() - mean).square()).sum();
  const double ss_res = (w.array() * resid.array().square()).sum();
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

  if (options.idler_folding) {
    fit.g_rest = 0.5 * fit.slope;
    fit.n_add_ex = 2.0 * fit.intercept / fit.slope;
    if (options.correction == Correction::mean_gain) {
      double g = 0.0;
      if (options.mean_gain) {
        g = *options.mean_gain;
      } else {
        for (const auto& p : points) g += p.wjpa_gain / static_cast<double>(n);
      }
      detail::require_positive(g, "mean WJPA gain");
      fit.correction = options.n_rest / g;
      fit.n_add_ex -= fit.correction;
    } else if (per_point) {
      double g = 0.0;
      for (const auto& p : points) g += p.wjpa_gain / static_cast<double>(n);
      fit.correction = options.n_rest / g;  // reported for comparison
    }
  } else {
    fit.g_rest = fit.slope;
    fit.n_add_ex = fit.intercept / fit.slope;
  }
  fit.n_add = fit.n_add_ex + 0.5;
  fit.negative_intercept = fit.intercept < 0.0;
  return fit;
}

NoiseResult yfactor_pipeline(const VtsSweepDataset& data, const PipelineOptions& options) {
  const Eigen::MatrixXd renorm = renormalize_noise(data);
  const auto nt = data.temps.size();
  const auto nf = data.freqs.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  NoiseResult out;
  out.freqs = data.freqs;
  out.n_add = Eigen::VectorXd::Constant(nf, nan);
  out.n_add_ex = Eigen::VectorXd::Constant(nf, nan);
  out.g_rest = Eigen::VectorXd::Constant(nf, nan);
  out.r2 = Eigen::VectorXd::Constant(nf, nan);
  out.min_gain = data.gain.colwise().minCoeff().transpose();
  out.masked.assign(static_cast<std::size_t>(nf), false);
  out.errors.assign(static_cast<std::size_t>(nf), std::string());

  if (data.pump_hz && nf > 0 && *data.pump_hz >= data.freqs(0) && *data.pump_hz <= data.freqs(nf - 1)) {
    Eigen::Index pump_bin = 0;
    (data.freqs.array() - *data.pump_hz).abs().minCoeff(&pump_bin);
    for (Eigen::Index j = 0; j < nf; ++j) {
      if (std::abs(j - pump_bin) <= options.guard_bins) out.masked[static_cast<std::size_t>(j)] = true;
    }
  }

  std::vector<YFactorPoint> points(static_cast<std::size_t>(nt));
  for (Eigen::Index j = 0; j < nf; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    if (out.masked[jj]) continue;
    const double f = data.freqs(j);
    const double to_quanta = data.rbw_hz > 0.0 ? 1.0 / (constants::planck * f * data.rbw_hz) : 1.0;
    for (Eigen::Index i = 0; i < nt; ++i) {
      auto& p = points[static_cast<std::size_t>(i)];
      p.n_in = johnson_quanta(data.temps(i), f);
      p.y = renorm(i, j) * to_quanta;
      p.wjpa_gain = data.gain(i, j);
    }
    try {
      const YFactorFit fit = yfactor_regression(points, options.regression);
      out.n_add(j) = fit.n_add;
      out.n_add_ex(j) = fit.n_add_ex;
      out.g_rest(j) = fit.g_rest;
      out.r2(j) = fit.r2;
    } catch (const Error& e) {
      out.errors[jj] = e.what();
    }
  }
  return out;
}

}  // namespace wjpa

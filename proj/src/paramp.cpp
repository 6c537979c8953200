#include "wjpa/paramp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace wjpa {
namespace {

using namespace std::complex_literals;
using cd = std::complex<double>;

constexpr Eigen::Index kMinFitPoints = 50;
constexpr double kMinSpanLinewidths = 3.0;

// Residual and analytic Jacobian for background x linear_s11 in scaled
// coordinates: frequencies relative to the trace centre, rates in units of
// `scale`, background abscissa normalized to the half span.
// Parameters: [f0, kappa_ext, kappa_int, a0, a1, t0, t1].
struct ReflectionFunctor : Eigen::DenseFunctor<double> {
  ReflectionFunctor(const ComplexTrace& trace, double center, double scale, double half_span, bool conjugate)
      : Eigen::DenseFunctor<double>(7, static_cast<int>(2 * trace.size())),
        data(trace.values),
        detuning((trace.freq_hz.array() - center) / scale),
        abscissa((trace.freq_hz.array() - center) / half_span),
        conj(conjugate) {}

  const Eigen::VectorXcd& data;
  Eigen::ArrayXd detuning;
  Eigen::ArrayXd abscissa;
  bool conj;

  cd background(const InputType& x, Eigen::Index k) const {
    return std::polar(x(3) + x(4) * abscissa(k), x(5) + x(6) * abscissa(k));
  }

  int operator()(const InputType& x, ValueType& fvec) const {
    const Eigen::Index n = data.size();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double d = detuning(k) - x(0);
      cd gamma = cd(0.5 * (x(1) - x(2)), d) / cd(0.5 * (x(1) + x(2)), -d);
      if (conj) gamma = std::conj(gamma);
      const cd r = background(x, k) * gamma - data(k);
      fvec(k) = r.real();
      fvec(k + n) = r.imag();
    }
    return 0;
  }

  int df(const InputType& x, JacobianType& jac) const {
    const Eigen::Index n = data.size();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double d = detuning(k) - x(0);
      const cd num(0.5 * (x(1) - x(2)), d);
      const cd den(0.5 * (x(1) + x(2)), -d);
      const cd den2 = den * den;
      cd gamma = num / den;
      cd d_f0 = -1i * x(1) / den2;
      cd d_ke = (den - num) / (2.0 * den2);
      cd d_ki = -x(1) / (2.0 * den2);
      if (conj) {
        gamma = std::conj(gamma);
        d_f0 = std::conj(d_f0);
        d_ke = std::conj(d_ke);
        d_ki = std::conj(d_ki);
      }
      const cd phase = std::polar(1.0, x(5) + x(6) * abscissa(k));
      const cd b = (x(3) + x(4) * abscissa(k)) * phase;
      const cd model = b * gamma;
      const cd cols[7] = {b * d_f0,     b * d_ke, b * d_ki, phase * gamma, abscissa(k) * phase * gamma,
                          1i * model, 1i * abscissa(k) * model};
      for (int j = 0; j < 7; ++j) {
        jac(k, j) = cols[j].real();
        jac(k + n, j) = cols[j].imag();
      }
    }
    return 0;
  }
};

struct FitAttempt {
  ReflectionFit fit;
  bool ok = false;
};

double wrap_phase(double phi) { return std::remainder(phi, 2.0 * constants::pi); }

FitAttempt run_fit(const ComplexTrace& trace, const LinearMode& init_mode, const BackgroundModel& init_bg,
                   bool conjugate) {
  const double center = init_bg.f_center;
  const double half_span = 0.5 * trace.span();
  const double scale = std::max(init_mode.kappa(), 1e-9 * half_span);

  Eigen::VectorXd x(7);
  x << (init_mode.f_res - center) / scale, init_mode.kappa_ext / scale, init_mode.kappa_int / scale, init_bg.amp0,
      init_bg.amp_slope * half_span, init_bg.phase0, init_bg.phase_slope * half_span;

  ReflectionFunctor functor(trace, center, scale, half_span, conjugate);
  Eigen::LevenbergMarquardt<ReflectionFunctor> lm(functor);
  lm.setXtol(1e-15);
  lm.setFtol(1e-15);
  lm.setGtol(0.0);
  lm.setMaxfev(4000);
  lm.minimize(x);

  FitAttempt out;
  if (!x.allFinite()) return out;
  Eigen::VectorXd fvec(2 * trace.size());
  functor(x, fvec);
  auto& fit = out.fit;
  fit.conjugate = conjugate;
  fit.residual = std::sqrt(fvec.squaredNorm() / static_cast<double>(trace.size()));
  fit.mode = LinearMode{center + x(0) * scale, x(1) * scale, x(2) * scale};
  fit.background = BackgroundModel{center, x(3), x(4) / half_span, x(5), x(6) / half_span};
  if (fit.background.amp0 < 0.0) {
    fit.background.amp0 = -fit.background.amp0;
    fit.background.amp_slope = -fit.background.amp_slope;
    fit.background.phase0 += constants::pi;
  }
  fit.background.phase0 = wrap_phase(fit.background.phase0);
  out.ok = std::isfinite(fit.residual);
  return out;
}

// Phase slope of the outer tenth of the trace on each side, averaged. The
// resonance adds little phase that far out, so this is mostly cable delay.
double edge_phase_slope(const ComplexTrace& trace) {
  const Eigen::Index n = trace.size();
  const Eigen::Index m = std::max<Eigen::Index>(3, n / 10);
  auto local = [&](Eigen::Index start) {
    Eigen::VectorXd ph(m);
    ph(0) = std::arg(trace.values(start));
    for (Eigen::Index k = 1; k < m; ++k) {
      ph(k) = ph(k - 1) + wrap_phase(std::arg(trace.values(start + k)) - std::arg(trace.values(start + k - 1)));
    }
    const Eigen::VectorXd f = trace.freq_hz.segment(start, m).array() - trace.freq_hz(start);
    const double fm = f.mean();
    const double pm = ph.mean();
    return ((f.array() - fm) * (ph.array() - pm)).sum() / (f.array() - fm).square().sum();
  };
  return 0.5 * (local(0) + local(n - m));
}

// Initial background from the trace ends, where the resonance reflects as -1.
BackgroundModel edge_background(const ComplexTrace& trace, bool with_delay = true) {
  const Eigen::Index n = trace.size();
  const Eigen::Index m = std::max<Eigen::Index>(1, n / 50);
  BackgroundModel bg;
  bg.f_center = 0.5 * (trace.freq_hz(0) + trace.freq_hz(n - 1));
  bg.phase_slope = with_delay ? edge_phase_slope(trace) : 0.0;
  auto derotated_mean = [&](Eigen::Index start) {
    cd acc = 0.0;
    for (Eigen::Index k = start; k < start + m; ++k) {
      acc -= trace.values(k) * std::polar(1.0, -bg.phase_slope * (trace.freq_hz(k) - bg.f_center));
    }
    return acc / static_cast<double>(m);
  };
  const cd lo = derotated_mean(0);
  const cd hi = derotated_mean(n - m);
  const double f_lo = trace.freq_hz.head(m).mean();
  const double f_hi = trace.freq_hz.tail(m).mean();
  bg.amp0 = 0.5 * (std::abs(lo) + std::abs(hi));
  bg.amp_slope = (std::abs(hi) - std::abs(lo)) / (f_hi - f_lo);
  bg.phase0 = std::arg(lo) + 0.5 * wrap_phase(std::arg(hi) - std::arg(lo));
  return bg;
}

void check_trace(const ComplexTrace& trace) {
  if (trace.size() < kMinFitPoints) throw Error(ErrorCode::InsufficientSpan, "reflection fit needs at least 50 points");
  for (Eigen::Index i = 1; i < trace.size(); ++i) {
    if (!(trace.freq_hz(i) > trace.freq_hz(i - 1))) {
      throw Error(ErrorCode::InvalidArgument, "trace frequencies must be strictly increasing");
    }
  }
  if (!trace.values.allFinite()) throw Error(ErrorCode::InvalidArgument, "trace contains non-finite samples");
}

double solve_bisection(const auto& fn, double lo, double hi, int iterations) {
  // fn(lo) < 0 <= fn(hi)
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (fn(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct AngularMode {
  double w0, kappa, kappa_ext;
};

AngularMode to_angular(const LinearMode& mode) {
  return {angular(mode.f_res), angular(mode.kappa()), angular(mode.kappa_ext)};
}

Eigen::Matrix2cd response_matrix(const AngularMode& m, double kerr, const PumpOperatingPoint& op, double delta,
                                 double extra_photons) {
  const double eff_detuning = op.delta_p - 2.0 * kerr * (op.n_p + extra_photons);
  const double coupling = kerr * op.n_p;
  Eigen::Matrix2cd mat;
  mat << cd(0.5 * m.kappa, -(eff_detuning + delta)), 1i * coupling,  //
      -1i * coupling, cd(0.5 * m.kappa, eff_detuning - delta);
  return mat;
}

// Pump photon number at which the low branch meets the instability boundary,
// or NaN when the detuning is too small for bistability.
double threshold_photons(const AngularMode& m, double kerr, double delta_p) {
  const double disc = delta_p * delta_p - 0.75 * m.kappa * m.kappa;
  if (disc < 0.0 || kerr * delta_p <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double k = std::abs(kerr);
  return (4.0 * kerr * delta_p - 2.0 * k * std::sqrt(disc)) / (6.0 * kerr * kerr);
}

double drive_from_photons(const AngularMode& m, double kerr, double delta_p, double n) {
  const double det = delta_p - kerr * n;
  return n * (0.25 * m.kappa * m.kappa + det * det);
}

}  // namespace

void LinearMode::validate() const {
  detail::require_positive(f_res, "f_res");
  detail::require_positive(kappa_ext, "kappa_ext");
  detail::require(kappa_int >= 0.0, ErrorCode::InvalidArgument, "kappa_int must be >= 0");
}

std::pair<double, double> locate_resonance(const ComplexTrace& trace) {
  const Eigen::Index n = trace.size();
  detail::require(n >= 5, ErrorCode::InsufficientSamples, "resonance search needs at least 5 samples");
  Eigen::Index best = 1;
  double best_speed = -1.0;
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    const double speed =
        std::abs(trace.values(k + 1) - trace.values(k - 1)) / (trace.freq_hz(k + 1) - trace.freq_hz(k - 1));
    if (speed > best_speed) {
      best_speed = speed;
      best = k;
    }
  }
  const double fc = trace.freq_hz(best);
  const cd sc = trace.values(best);
  // kappa = 2 D / max|dS/df| for a Lorentzian circle of diameter D; refine D
  // on a window of a few estimated linewidths.
  auto diameter = [&](double half_window) {
    double d = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(trace.freq_hz(k) - fc) <= half_window) d = std::max(d, std::abs(trace.values(k) - sc));
    }
    return d;
  };
  if (!(best_speed > 0.0)) return {fc, trace.span()};
  double kappa = 2.0 * diameter(trace.span()) / best_speed;
  for (int it = 0; it < 3; ++it) kappa = 2.0 * diameter(5.0 * kappa) / best_speed;
  return {fc, kappa};
}

ReflectionFit fit_reflection(const ComplexTrace& trace, std::optional<LinearMode> guess) {
  check_trace(trace);
  const BackgroundModel bg = edge_background(trace);
  detail::require(bg.amp0 > 0.0, ErrorCode::FitDiverged, "trace has zero background amplitude");

  LinearMode init;
  if (guess) {
    init = *guess;
  } else {
    ComplexTrace flat = trace;
    for (Eigen::Index k = 0; k < flat.size(); ++k) {
      flat.values(k) *= std::polar(1.0, -bg.phase_slope * (flat.freq_hz(k) - bg.f_center));
    }
    const auto [fc, kappa] = locate_resonance(flat);
    Eigen::Index kc = 0;
    (trace.freq_hz.array() - fc).abs().minCoeff(&kc);
    const cd b_at = bg(fc);
    const double depth = std::abs(trace.values(kc) + b_at);  // |S(fc) - S(far)|
    const double ratio = std::clamp(depth / (2.0 * std::abs(b_at)), 0.05, 0.99);
    init = LinearMode{fc, kappa * ratio, kappa * (1.0 - ratio)};
  }

  // Start with and without the delay estimate: on narrow traces the edge
  // slope is mostly the resonance itself.
  const BackgroundModel no_delay = edge_background(trace, false);
  std::optional<ReflectionFit> best;
  for (const BackgroundModel* start : {&bg, &no_delay}) {
    for (const bool conj : {false, true}) {
      const auto attempt = run_fit(trace, init, *start, conj);
      if (attempt.ok && (!best || attempt.fit.residual < best->residual)) best = attempt.fit;
    }
  }
  if (!best) throw Error(ErrorCode::FitDiverged, "non-finite fit parameters");

  ReflectionFit& fit = *best;
  LinearMode& m = fit.mode;
  if (!(m.kappa() > 0.0) || !(m.kappa_ext > 0.0)) throw Error(ErrorCode::FitDiverged, "non-physical linewidth");
  if (m.f_res < trace.freq_hz(0) || m.f_res > trace.freq_hz(trace.size() - 1)) {
    throw Error(ErrorCode::FitDiverged, "fitted resonance outside the trace");
  }
  // Lossless traces can land marginally below zero internal loss.
  if (m.kappa_int < 0.0) {
    if (-m.kappa_int > 0.02 * m.kappa()) throw Error(ErrorCode::FitDiverged, "negative internal loss");
    m.kappa_int = 0.0;
  }
  const double visibility = 2.0 * fit.background.amp0 * m.kappa_ext / m.kappa();
  if (!(visibility > std::max(5.0 * fit.residual, 1e-6 * fit.background.amp0)) ||
      fit.residual > 0.5 * fit.background.amp0) {
    throw Error(ErrorCode::FitDiverged, "no resolvable resonance in the trace");
  }
  if (trace.span() < kMinSpanLinewidths * m.kappa()) {
    throw Error(ErrorCode::InsufficientSpan, "trace spans fewer than 3 linewidths");
  }
  return fit;
}

std::vector<FluxPoint> flux_map(const DeviceCircuit& circuit, std::span<const double> flux_grid,
                                const FluxMapOptions& options) {
  circuit.validate();
  const Eigen::VectorXd scan = linear_grid(options.scan_lo_hz, options.scan_hi_hz, options.scan_points);
  std::vector<FluxPoint> out;
  out.reserve(flux_grid.size());
  for (const double phi : flux_grid) {
    FluxPoint point;
    point.flux = phi;
    try {
      DeviceCircuit biased = circuit;
      biased.flux = phi;
      point.l_j = biased.junction_inductance();
      const auto [fc, kappa] = locate_resonance(reflection_from_circuit(biased, scan));
      const double half = options.fit_half_span_linewidths * kappa;
      const Eigen::VectorXd grid = linear_grid(std::max(fc - half, 1.0), fc + half, options.fit_points);
      const auto fit = fit_reflection(reflection_from_circuit(biased, grid));
      point.mode = fit.mode;
      point.residual = fit.residual;
    } catch (const Error& e) {
      point.error = e.what();
    }
    out.push_back(std::move(point));
  }
  return out;
}

PumpOperatingPoint pump_steady_state(const LinearMode& mode, double kerr, const PumpSetting& pump, Branch branch) {
  mode.validate();
  detail::require(pump.power_w >= 0.0, ErrorCode::InvalidArgument, "pump power must be >= 0");
  detail::require_positive(pump.f_pump, "pump frequency");
  const AngularMode m = to_angular(mode);
  const double wp = angular(pump.f_pump);

  PumpOperatingPoint op;
  op.f_pump = pump.f_pump;
  op.power_w = pump.power_w;
  op.delta_p = wp - m.w0;
  op.branch = branch;

  const double drive = m.kappa_ext * pump.power_w / (constants::hbar * wp);
  if (drive == 0.0) {
    op.roots = {0.0};
  } else if (kerr == 0.0) {
    op.roots = {drive / (0.25 * m.kappa * m.kappa + op.delta_p * op.delta_p)};
  } else {
    // n = s kappa/|K| gives the monic cubic s^3 + b s^2 + c s + d = 0 with O(1) coefficients.
    const double u = op.delta_p / m.kappa;
    const double sign = kerr > 0.0 ? 1.0 : -1.0;
    const double b = -2.0 * sign * u;
    const double c = 0.25 + u * u;
    const double d = -drive * std::abs(kerr) / (m.kappa * m.kappa * m.kappa);
    auto poly = [&](double s) { return ((s + b) * s + c) * s + d; };
    auto dpoly = [&](double s) { return (3.0 * s + 2.0 * b) * s + c; };

    const double p = c - b * b / 3.0;
    const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    const double disc = 0.25 * q * q + p * p * p / 27.0;
    std::vector<double> s_roots;
    if (disc > 0.0) {
      const double r = std::sqrt(disc);
      s_roots.push_back(std::cbrt(-0.5 * q + r) + std::cbrt(-0.5 * q - r) - b / 3.0);
    } else {
      const double amp = 2.0 * std::sqrt(-p / 3.0);
      const double arg = std::clamp(1.5 * q / p * std::sqrt(-3.0 / p), -1.0, 1.0);
      const double theta = std::acos(arg) / 3.0;
      for (int k = 0; k < 3; ++k) s_roots.push_back(amp * std::cos(theta - 2.0 * constants::pi * k / 3.0) - b / 3.0);
    }
    for (double& s : s_roots) {
      for (int it = 0; it < 8; ++it) {
        const double slope = dpoly(s);
        if (slope == 0.0) break;
        const double step = poly(s) / slope;
        s -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(s))) break;
      }
    }
    std::sort(s_roots.begin(), s_roots.end());
    const double scale = m.kappa / std::abs(kerr);
    for (const double s : s_roots) {
      if (s < 0.0) continue;
      const double n = s * scale;
      if (!op.roots.empty() && std::abs(n - op.roots.back()) <= 1e-9 * std::max(1.0, n)) continue;
      op.roots.push_back(n);
    }
  }
  if (op.roots.empty()) throw Error(ErrorCode::NoPhysicalRoot, "steady-state cubic has no non-negative real root");
  op.n_p = branch == Branch::low ? op.roots.front() : op.roots.back();
  if (drive > 0.0 && pump_residual(mode, kerr, op) > 1e-9) {
    throw Error(ErrorCode::NoPhysicalRoot, "steady-state root did not converge");
  }
  return op;
}

double pump_residual(const LinearMode& mode, double kerr, const PumpOperatingPoint& op) {
  const AngularMode m = to_angular(mode);
  const double drive = m.kappa_ext * op.power_w / (constants::hbar * angular(op.f_pump));
  const double lhs = drive_from_photons(m, kerr, op.delta_p, op.n_p);
  return drive == 0.0 ? std::abs(lhs) : std::abs(lhs - drive) / drive;
}

SignalGain small_signal_gain(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, double delta,
                             double extra_photons) {
  const AngularMode m = to_angular(mode);
  const Eigen::Matrix2cd mat = response_matrix(m, kerr, op, delta, extra_photons);
  const Eigen::Matrix2cd s = m.kappa_ext * mat.inverse() - Eigen::Matrix2cd::Identity();
  SignalGain g;
  g.s_ss = s(0, 0);
  g.s_si = s(0, 1);
  g.signal = std::norm(g.s_ss);
  g.idler = std::norm(g.s_si);
  return g;
}

bool is_unstable(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, double extra_photons) {
  const AngularMode m = to_angular(mode);
  const double eff_detuning = op.delta_p - 2.0 * kerr * (op.n_p + extra_photons);
  const double coupling = kerr * op.n_p;
  // Eigenvalues of the linearized dynamics: -kappa/2 +- sqrt(|K a^2|^2 - detuning^2).
  const cd root = std::sqrt(cd(coupling * coupling - eff_detuning * eff_detuning, 0.0));
  return (-0.5 * m.kappa + root.real()) > 0.0;
}

GainResult gain_profile(const LinearMode& mode, double kerr, const PumpSetting& pump, const Eigen::VectorXd& grid_hz,
                        Branch branch) {
  const PumpOperatingPoint op = pump_steady_state(mode, kerr, pump, branch);
  if (is_unstable(mode, kerr, op)) throw Error(ErrorCode::UnstableOperatingPoint, "pump exceeds the parametric threshold");
  GainResult out;
  out.freq_hz = grid_hz;
  out.gain.resize(grid_hz.size());
  for (Eigen::Index i = 0; i < grid_hz.size(); ++i) {
    out.gain(i) = small_signal_gain(mode, kerr, op, angular(grid_hz(i) - pump.f_pump)).signal;
  }
  Eigen::Index peak = 0;
  out.peak_gain = out.gain.maxCoeff(&peak);
  out.peak_freq = grid_hz(peak);

  const double half = 0.5 * out.peak_gain;
  auto crossing = [&](Eigen::Index inside, Eigen::Index outside) {
    const double g0 = out.gain(inside), g1 = out.gain(outside);
    return grid_hz(inside) + (half - g0) / (g1 - g0) * (grid_hz(outside) - grid_hz(inside));
  };
  std::optional<double> left, right;
  for (Eigen::Index i = peak; i > 0; --i) {
    if (out.gain(i - 1) < half) {
      left = crossing(i, i - 1);
      break;
    }
  }
  for (Eigen::Index i = peak; i + 1 < grid_hz.size(); ++i) {
    if (out.gain(i + 1) < half) {
      right = crossing(i, i + 1);
      break;
    }
  }
  out.bandwidth_3db = (left && right) ? *right - *left : 0.0;
  return out;
}

PumpSetting tune_pump_for_gain(const LinearMode& mode, double kerr, double pump_detuning_hz, double target_gain) {
  mode.validate();
  detail::require(target_gain > 1.0, ErrorCode::InvalidArgument, "target gain must exceed unity");
  detail::require(kerr != 0.0, ErrorCode::InvalidArgument, "a linear resonator has no parametric gain");
  const AngularMode m = to_angular(mode);
  const double delta_p = angular(pump_detuning_hz);
  const double f_pump = mode.f_res + pump_detuning_hz;

  auto gain_at = [&](double n) {
    PumpOperatingPoint op;
    op.f_pump = f_pump;
    op.delta_p = delta_p;
    op.n_p = n;
    return small_signal_gain(mode, kerr, op, 0.0).signal;
  };

  double n_hi = threshold_photons(m, kerr, delta_p);
  if (std::isnan(n_hi)) {
    // No bistability: gain is bounded; bracket its maximum on a log grid.
    const double n_scale = m.kappa / std::abs(kerr);
    double best_n = 0.0, best_g = 1.0;
    for (int i = 0; i <= 400; ++i) {
      const double n = n_scale * std::pow(10.0, -4.0 + 6.0 * i / 400.0);
      const double g = gain_at(n);
      if (g > best_g) {
        best_g = g;
        best_n = n;
      }
    }
    if (best_g < target_gain) throw Error(ErrorCode::InvalidArgument, "target gain unreachable at this pump detuning");
    n_hi = best_n;
  } else {
    n_hi *= 1.0 - 1e-12;
  }
  if (gain_at(n_hi) < target_gain) throw Error(ErrorCode::InvalidArgument, "target gain unreachable at this pump detuning");

  const double n = solve_bisection([&](double x) { return gain_at(x) - target_gain; }, 0.0, n_hi, 200);
  const double drive = drive_from_photons(m, kerr, delta_p, n);
  return PumpSetting{f_pump, drive * constants::hbar * angular(f_pump) / m.kappa_ext};
}

double saturated_gain(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, double delta,
                      double signal_power_w, double* photons_hint) {
  const AngularMode m = to_angular(mode);
  const double ws = angular(op.f_pump) + delta;
  const double a_in = std::sqrt(signal_power_w / (constants::hbar * ws));
  const Eigen::Vector2cd drive(std::sqrt(m.kappa_ext) * a_in, 0.0);

  auto photons = [&](double extra) {
    const Eigen::Vector2cd v = response_matrix(m, kerr, op, delta, extra).partialPivLu().solve(drive);
    return v.squaredNorm();
  };
  // Continuation: smallest self-consistent photon number above the hint.
  double lo = (photons_hint && *photons_hint > 0.0) ? *photons_hint : 0.0;
  if (lo - photons(lo) > 0.0) lo = 0.0;
  double hi = std::max(photons(lo), lo);
  double step = std::max(hi - lo, 1e-30);
  hi = lo + step;
  while (hi - photons(hi) < 0.0) {
    step *= 2.0;
    hi = lo + step;
    if (!std::isfinite(hi)) throw Error(ErrorCode::NoCompressionFound, "signal photon number diverges");
  }
  const double n_s = solve_bisection([&](double x) { return x - photons(x); }, lo, hi, 200);
  if (photons_hint) *photons_hint = n_s;
  return small_signal_gain(mode, kerr, op, delta, n_s).signal;
}

P1dbResult p1db(const LinearMode& mode, double kerr, const PumpOperatingPoint& op, const P1dbOptions& options) {
  if (is_unstable(mode, kerr, op)) throw Error(ErrorCode::UnstableOperatingPoint, "pump exceeds the parametric threshold");
  const double delta = angular(options.signal_offset_hz);
  P1dbResult out;
  out.small_signal_gain = small_signal_gain(mode, kerr, op, delta).signal;
  detail::require(out.small_signal_gain > 1.0, ErrorCode::InvalidArgument, "operating point does not amplify");
  const double target_db = linear_to_db(out.small_signal_gain) - 1.0;

  double hint = 0.0;
  double prev_dbm = options.scan_start_dbm;
  double prev_hint = 0.0;
  for (double dbm = options.scan_start_dbm; dbm <= options.scan_stop_dbm + 1e-9; dbm += options.scan_step_db) {
    const double g = saturated_gain(mode, kerr, op, delta, dbm_to_watt(dbm), &hint);
    if (linear_to_db(g) <= target_db) {
      auto excess = [&](double x) {
        double h = prev_hint;
        return target_db - linear_to_db(saturated_gain(mode, kerr, op, delta, dbm_to_watt(x), &h));
      };
      out.p1db_w = dbm_to_watt(solve_bisection(excess, prev_dbm, dbm, 60));
      return out;
    }
    prev_dbm = dbm;
    prev_hint = hint;
  }
  throw Error(ErrorCode::NoCompressionFound, "gain not compressed by 1 dB within the power scan");
}

double p1db_slope(std::span<const std::pair<double, double>> series) {
  if (series.size() < 4) throw Error(ErrorCode::InsufficientPoints, "slope fit needs at least 4 points");
  const double n = static_cast<double>(series.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : series) {
    mx += x / n;
    my += y / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : series) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  detail::require(sxx > 0.0, ErrorCode::InvalidArgument, "pump powers must not all be equal");
  return sxy / sxx;
}

}  // namespace wjpa

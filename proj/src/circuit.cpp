#include "wjpa/circuit.hpp"

#include <algorithm>
#include <array>
#include <boost/math/tools/toms748_solve.hpp>
#include <cstdint>

namespace wjpa {
namespace {

using namespace std::complex_literals;

constexpr double kStubSineTolerance = 1e-9;
constexpr int kScanIntervals = 256;
constexpr std::uintmax_t kRootIterationCap = 200;
constexpr double kStencilStep = 0.0025;  // two steps each side span 0.5 % of f_res

double im_admittance(const DeviceCircuit& circuit, double f_hz) {
  return input_admittance(circuit, f_hz).imag();
}

// Cubic Lagrange interpolation through the four samples bracketing f.
double interpolate_imag(const ComplexTrace& trace, double f) {
  const auto& fr = trace.freq_hz;
  const auto* begin = fr.data();
  const auto* end = fr.data() + fr.size();
  const auto upper = std::upper_bound(begin, end, f);
  Eigen::Index hi = upper - begin;
  Eigen::Index start = std::clamp<Eigen::Index>(hi - 2, 0, fr.size() - 4);
  double value = 0.0;
  for (Eigen::Index i = start; i < start + 4; ++i) {
    double weight = 1.0;
    for (Eigen::Index j = start; j < start + 4; ++j) {
      if (j != i) weight *= (f - fr(j)) / (fr(i) - fr(j));
    }
    value += weight * trace.values(i).imag();
  }
  return value;
}

BbqResult bbq_from_slope(double slope, double f_res, double l_j) {
  if (!(slope > 0.0)) {
    throw Error(ErrorCode::NonPositiveSlope, "dIm(Y)/dw is not positive at f_res; wrong resonance branch");
  }
  const double w = angular(f_res);
  BbqResult out;
  out.c_p = 0.5 * slope;
  out.l_p = 1.0 / (w * w * out.c_p);
  out.p = out.l_p / l_j;
  return out;
}

double five_point_slope(const std::array<double, 5>& b, double step_w) {
  return (b[0] - 8.0 * b[1] + 8.0 * b[3] - b[4]) / (12.0 * step_w);
}

}  // namespace

void JunctionProcess::validate() const {
  detail::require_positive(critical_current_density_a_per_cm2, "critical current density");
  detail::require_positive(specific_capacitance_ff_per_um2, "specific capacitance");
  detail::require_positive(area_um2, "junction area");
}

void DeviceCircuit::validate() const {
  detail::require_positive(l_j0, "l_j0");
  detail::require_positive(c_j, "c_j");
  detail::require_positive(c_s, "c_s");
  detail::require_positive(c_c, "c_c");
  detail::require_positive(port_impedance, "port_impedance");
  detail::require(shunt_conductance >= 0.0, ErrorCode::InvalidArgument, "shunt_conductance must be >= 0");
  if (has_stub) {
    detail::require_positive(z_slot, "z_slot");
    detail::require_positive(stub_length, "stub_length");
    detail::require(eff_index >= 1.0, ErrorCode::InvalidArgument, "eff_index must be >= 1");
  }
}

double DeviceCircuit::junction_inductance() const { return squid_inductance(l_j0, flux); }

DeviceCircuit DeviceCircuit::nominal() {
  DeviceCircuit c;
  c.l_j0 = 120e-12;
  c.c_j = 220e-15;
  c.c_s = 220e-15;
  c.c_c = 18e-15;
  c.z_slot = 110.0;
  c.stub_length = 1.3e-3;
  c.eff_index = constants::speed_of_light / (4.0 * 21e9 * c.stub_length);
  c.port_impedance = c.z_slot;
  return c;
}

void TaperSpec::validate() const {
  detail::require_positive(slot_gap, "slot gap");
  detail::require_positive(length, "transition length");
  detail::require(waveguide_height > slot_gap, ErrorCode::InvalidArgument, "waveguide height must exceed slot gap");
}

TaperSpec TaperSpec::wr42() { return TaperSpec{4.32e-3, 200e-6, 4.5e-3}; }

JunctionParams junction_from_process(const JunctionProcess& proc) {
  proc.validate();
  const double area_m2 = proc.area_um2 * 1e-12;
  JunctionParams out;
  out.critical_current = proc.critical_current_density_a_per_cm2 * 1e4 * area_m2;
  out.capacitance = proc.specific_capacitance_ff_per_um2 * 1e-15 * proc.area_um2;
  out.inductance = constants::flux_quantum / (2.0 * constants::pi * out.critical_current);
  return out;
}

double taper_profile(double x, const TaperSpec& spec) {
  spec.validate();
  if (x < 0.0 || x > spec.length) throw Error(ErrorCode::OutOfRange, "taper coordinate outside [0, A]");
  const double u = x / spec.length;
  return 0.5 * (spec.waveguide_height - spec.slot_gap) * u * std::sqrt(2.0 - u * u);
}

Eigen::MatrixX2d taper_curve(const TaperSpec& spec, Eigen::Index n) {
  detail::require(n >= 2, ErrorCode::InvalidArgument, "taper curve needs at least two points");
  Eigen::MatrixX2d out(n, 2);
  out.col(0) = Eigen::VectorXd::LinSpaced(n, 0.0, spec.length);
  for (Eigen::Index i = 0; i < n; ++i) out(i, 1) = taper_profile(out(i, 0), spec);
  return out;
}

std::complex<double> input_admittance(const DeviceCircuit& circuit, double f_hz) {
  detail::require_positive(f_hz, "frequency");
  const double w = angular(f_hz);
  const std::complex<double> y_res =
      1i * w * (circuit.c_s + circuit.c_j) + 1.0 / (1i * w * circuit.junction_inductance()) + circuit.shunt_conductance;
  const std::complex<double> y_cc = 1i * w * circuit.c_c;
  std::complex<double> y = y_cc * y_res / (y_res + y_cc);
  if (circuit.has_stub) {
    const double beta_l = w * circuit.eff_index * circuit.stub_length / constants::speed_of_light;
    const double s = std::sin(beta_l);
    if (std::abs(s) < kStubSineTolerance) {
      throw Error(ErrorCode::StubResonance, "evaluation at a short-circuit resonance of the stub");
    }
    y += -1i * (std::cos(beta_l) / s) / circuit.z_slot;
  }
  return y;
}

ComplexTrace admittance_trace(const DeviceCircuit& circuit, const Eigen::VectorXd& grid_hz) {
  circuit.validate();
  Eigen::VectorXcd y(grid_hz.size());
  for (Eigen::Index i = 0; i < grid_hz.size(); ++i) y(i) = input_admittance(circuit, grid_hz(i));
  return ComplexTrace(grid_hz, y);
}

double find_resonance(const DeviceCircuit& circuit, double f_lo, double f_hi) {
  circuit.validate();
  detail::require_positive(f_lo, "bracket start");
  detail::require(f_hi > f_lo, ErrorCode::InvalidArgument, "bracket must be increasing");

  auto g = [&](double f) { return im_admittance(circuit, f); };
  double prev_f = f_lo;
  double prev = g(f_lo);
  if (prev == 0.0) return f_lo;
  for (int i = 1; i <= kScanIntervals; ++i) {
    const double f = f_lo + (f_hi - f_lo) * i / kScanIntervals;
    const double cur = g(f);
    if (cur == 0.0) return f;
    // Rising crossings are zeros; falling crossings are poles.
    if (prev < 0.0 && cur > 0.0) {
      std::uintmax_t iters = kRootIterationCap;
      boost::math::tools::eps_tolerance<double> tol(40);
      const auto [a, b] = boost::math::tools::toms748_solve(g, prev_f, f, prev, cur, tol, iters);
      if (iters >= kRootIterationCap) throw Error(ErrorCode::NoRootInBracket, "root refinement did not converge");
      return 0.5 * (a + b);
    }
    prev_f = f;
    prev = cur;
  }
  throw Error(ErrorCode::NoRootInBracket, "Im(Y) has no rising zero crossing in the bracket");
}

BbqResult bbq_extract(const ComplexTrace& admittance, double f_res, double l_j) {
  detail::require_positive(f_res, "f_res");
  detail::require_positive(l_j, "L_J");
  const auto& fr = admittance.freq_hz;
  const double h = kStencilStep * f_res;
  if (fr.size() < 5 || fr(0) > f_res - 2.0 * h || fr(fr.size() - 1) < f_res + 2.0 * h) {
    throw Error(ErrorCode::InsufficientSamples, "admittance samples do not cover f_res +- 0.5 %");
  }
  const auto inside = (fr.array() >= f_res - 2.0 * h && fr.array() <= f_res + 2.0 * h).count();
  if (inside < 5) throw Error(ErrorCode::InsufficientSamples, "fewer than 5 samples within f_res +- 0.5 %");

  std::array<double, 5> b{};
  for (int k = -2; k <= 2; ++k) b[k + 2] = interpolate_imag(admittance, f_res + k * h);
  return bbq_from_slope(five_point_slope(b, angular(h)), f_res, l_j);
}

BbqResult bbq_from_circuit(const DeviceCircuit& circuit, double f_res) {
  circuit.validate();
  detail::require_positive(f_res, "f_res");
  const double h = kStencilStep * f_res;
  std::array<double, 5> b{};
  for (int k = -2; k <= 2; ++k) b[k + 2] = im_admittance(circuit, f_res + k * h);
  return bbq_from_slope(five_point_slope(b, angular(h)), f_res, circuit.junction_inductance());
}

double kerr_from_participation(double p, double f_res, double l_j) {
  detail::require(p > 0.0 && p <= 1.0, ErrorCode::InvalidArgument, "participation must lie in (0, 1]");
  detail::require_positive(f_res, "f_res");
  detail::require_positive(l_j, "L_J");
  const double reduced_flux = constants::flux_quantum / (2.0 * constants::pi);
  const double e_j = reduced_flux * reduced_flux / l_j;
  const double w0 = angular(f_res);
  return -p * p * constants::hbar * w0 * w0 / (8.0 * e_j);
}

ComplexTrace reflection_from_circuit(const DeviceCircuit& circuit, const Eigen::VectorXd& grid_hz) {
  circuit.validate();
  const double y0 = 1.0 / circuit.port_impedance;
  Eigen::VectorXcd gamma(grid_hz.size());
  for (Eigen::Index i = 0; i < grid_hz.size(); ++i) {
    const auto y = input_admittance(circuit, grid_hz(i));
    gamma(i) = (y0 - y) / (y0 + y);
  }
  return ComplexTrace(grid_hz, gamma);
}

}  // namespace wjpa

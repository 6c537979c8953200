#pragma once

// Lumped/distributed model of the waveguide-coupled SQUID resonator and
// black-box quantization of its port admittance.

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "wjpa/constants.hpp"
#include "wjpa/error.hpp"
#include "wjpa/trace.hpp"

namespace wjpa {

/// Fabrication process figures for a single junction.
struct JunctionProcess {
  double critical_current_density_a_per_cm2 = 0.0;
  double specific_capacitance_ff_per_um2 = 0.0;
  double area_um2 = 0.0;

  void validate() const;
};

/// Junction electrical parameters, SI units.
struct JunctionParams {
  double critical_current = 0.0;  // A
  double inductance = 0.0;        // H
  double capacitance = 0.0;       // F
};

/// Resonator (L_J || C_J || C_S) in series with C_c, shunting a shorted slotline
/// stub at the port reference plane. SI units throughout.
struct DeviceCircuit {
  double l_j0 = 0.0;             // zero-flux SQUID inductance
  double c_j = 0.0;              // junction capacitance
  double c_s = 0.0;              // shunt capacitance
  double c_c = 0.0;              // effective coupling capacitance
  double z_slot = 0.0;           // slotline characteristic impedance
  double stub_length = 0.0;      // coupling point to short
  double eff_index = 1.0;        // slotline effective index
  double port_impedance = 0.0;   // source impedance at the reference plane
  double flux = 0.0;             // external flux in units of the flux quantum
  double shunt_conductance = 0.0;  // resonator loss, S
  bool has_stub = true;

  void validate() const;

  /// SQUID inductance at the configured flux bias.
  double junction_inductance() const;

  /// 120 pH / 220 fF / 220 fF / 18 fF, 110 ohm slotline with a 1.3 mm stub
  /// that is a quarter wave at 21 GHz.
  static DeviceCircuit nominal();
};

/// Waveguide-to-slotline transition geometry.
struct TaperSpec {
  double waveguide_height = 0.0;  // W_a, small waveguide dimension
  double slot_gap = 0.0;          // S
  double length = 0.0;            // A

  void validate() const;
  static TaperSpec wr42();
};

/// Mode quantities extracted from the circuit.
struct ModeParams {
  double f_res = 0.0;
  double kappa_ext = 0.0;  // Hz
  double kappa_int = 0.0;  // Hz
  double c_p = 0.0;
  double l_p = 0.0;
  double p = 0.0;
  double kerr = 0.0;       // rad/s per photon, negative for a softening mode

  double loaded_q() const { return f_res / (kappa_ext + kappa_int); }
};

struct BbqResult {
  double c_p = 0.0;
  double l_p = 0.0;
  double p = 0.0;
};

/// |cos(pi phi)| at or below this raises DivergentInductance.
inline constexpr double kFluxCutoff = 1e-3;

/// Symmetric-SQUID inductance L_J0 / |cos(pi phi)|.
template <typename Scalar>
Scalar squid_inductance(Scalar l_j0, Scalar phi_ext) {
  detail::require_positive(l_j0, "L_J0");
  const Scalar c = std::abs(std::cos(Scalar(constants::pi) * phi_ext));
  if (c <= Scalar(kFluxCutoff)) {
    throw Error(ErrorCode::DivergentInductance, "flux bias at half flux quantum");
  }
  return l_j0 / c;
}

template <typename Scalar>
Scalar plasma_frequency(Scalar l_j, Scalar c_j) {
  detail::require_positive(l_j, "L_J");
  detail::require_positive(c_j, "C_J");
  return Scalar(1) / (Scalar(2 * constants::pi) * std::sqrt(l_j * c_j));
}

JunctionParams junction_from_process(const JunctionProcess& proc);

/// Half-width y(x) of the tapered transition, x in [0, A].
double taper_profile(double x, const TaperSpec& spec);

/// (x, y) samples of the transition curve, n rows.
Eigen::MatrixX2d taper_curve(const TaperSpec& spec, Eigen::Index n);

/// Total admittance at the coupling reference plane (engineering j convention,
/// e^{+j w t}).
std::complex<double> input_admittance(const DeviceCircuit& circuit, double f_hz);

ComplexTrace admittance_trace(const DeviceCircuit& circuit, const Eigen::VectorXd& grid_hz);

/// Zero of Im(Y) with positive slope inside [f_lo, f_hi]. Poles of Y are
/// skipped: between consecutive poles a lossless admittance has exactly one
/// rising zero crossing.
double find_resonance(const DeviceCircuit& circuit, double f_lo, double f_hi);

/// Mode capacitance from half the slope of Im(Y) at f_res, estimated with a
/// 5-point centered stencil spanning +-0.5 % of f_res. Samples need not lie on
/// the stencil: they are interpolated with local cubics.
BbqResult bbq_extract(const ComplexTrace& admittance, double f_res, double l_j);

/// Same estimator evaluated directly on the circuit model.
BbqResult bbq_from_circuit(const DeviceCircuit& circuit, double f_res);

/// Self-Kerr per photon, K = -p^2 hbar w0^2 / (8 E_J).
double kerr_from_participation(double p, double f_res, double l_j);

/// Gamma = (1/Z_port - Y) / (1/Z_port + Y) on the grid.
ComplexTrace reflection_from_circuit(const DeviceCircuit& circuit, const Eigen::VectorXd& grid_hz);

}  // namespace wjpa

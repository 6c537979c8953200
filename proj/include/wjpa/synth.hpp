#pragma once

// Synthetic measurement chain: VNA traces, VTS noise sweeps, Ramsey fringe
// series and analyzer spectra with known ground truth.

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "wjpa/noisecal.hpp"
#include "wjpa/paramp.hpp"
#include "wjpa/qubitcal.hpp"
#include "wjpa/trace.hpp"

namespace wjpa {

/// xorshift64* with a splitmix64-expanded seed; normals by Box-Muller.
/// The sequence is part of the file-format contract, so it does not depend on
/// the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();  // [0, 1), 53 bits
  double normal();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// G(N) = 1 + (g0 - 1) / (1 + N_th / n_sat), N_th = N_in - 1/2 the thermal
/// part of the input occupation.
struct CompressionLaw {
  double g0 = 1.0;
  double n_sat = std::numeric_limits<double>::infinity();

  double gain(double n_in) const;
  void validate() const;

  /// n_sat such that the gain falls from g0 to g_end at thermal occupation n_th_end.
  static CompressionLaw from_endpoints(double g0, double g_end, double n_th_end);
};

struct ChainScenario {
  std::vector<ChainStage> stages;  // everything after the WJPA
  Eigen::VectorXd vts_temps;       // K
  std::uint64_t seed = 1;
  double radiometer_samples = 0.0;  // 0: no radiometer noise
  double rbw_hz = 1e6;
  bool wjpa_on = true;
  std::optional<double> pump_hz;

  void validate() const;
  /// 0.1 ... 1.75 K, HEMT-dominated chain of 20 quanta.
  static ChainScenario nominal();
};

ComplexTrace simulate_vna_trace(const LinearMode& mode, const BackgroundModel& background, double noise_snr,
                                const Eigen::VectorXd& grid_hz, std::uint64_t seed);

VtsSweepDataset simulate_vts_sweep(const ChainScenario& scenario, double n_add_ex, const CompressionLaw& compression,
                                   const Eigen::VectorXd& freqs);

struct RamseyOptions {
  Eigen::Index points = 4096;
  double amplitude = 1.0;
  double offset = 0.0;
};

/// `attenuation` is the cavity-plane / room-temperature power ratio. SNR is
/// fringe amplitude over per-sample noise.
std::vector<RamseyFringe> simulate_ramsey_series(const DispersiveDevice& dev, const Eigen::VectorXd& powers_w,
                                                 double attenuation, double snr, std::uint64_t seed,
                                                 const RamseyOptions& options = {});

struct Tone {
  double offset_hz = 0.0;
  double quanta = 0.0;  // height above the floor in one bin
};

struct Spectrum {
  Eigen::VectorXd offset_hz;
  Eigen::VectorXd p_w;
};

struct SpectrumOptions {
  Eigen::Index points = 1001;
  double radiometer_samples = 0.0;
};

Spectrum simulate_output_spectrum(const std::vector<Tone>& tones, double floor_quanta, double g_sys_db,
                                  double omega_d, double rbw_hz, double span_hz, std::uint64_t seed,
                                  const SpectrumOptions& options = {});

}  // namespace wjpa

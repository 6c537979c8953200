#pragma once

// Thermal noise of a matched source, Friis cascading and Y-factor extraction of
// amplifier added noise under gain compression.
//
// Noise model at one frequency, in quanta referred to the amplifier input:
//   N_out = G_rest [G_W (N_in + N_in^idler + N_ex) + N_rest],  N_in^idler = N_in
// so y = N_out / G_W = 2 G_rest (N_in + N_ex / 2 + N_rest / (2 G_W)).

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wjpa/constants.hpp"
#include "wjpa/error.hpp"

namespace wjpa {

/// (1/2) coth(h f / 2 k_B T); exactly 0.5 at T = 0.
double johnson_quanta(double t_k, double f_hz);

struct ChainStage {
  std::string name;
  double gain = 1.0;         // linear, < 1 for loss
  double added_noise = 0.0;  // quanta referred to the stage input

  void validate() const;
};

struct ChainTotals {
  double gain = 1.0;
  double added_noise = 0.0;
};

ChainTotals friis_chain(std::span<const ChainStage> stages);

struct VtsSweepDataset {
  Eigen::VectorXd freqs;        // Hz
  Eigen::VectorXd temps;        // K, strictly increasing
  Eigen::MatrixXd noise;        // output noise power (W in rbw_hz), temps x freqs
  Eigen::MatrixXd gain;         // WJPA gain (linear), temps x freqs
  double rbw_hz = 0.0;          // 0: noise already in quanta
  std::optional<double> pump_hz;

  void validate() const;
};

/// noise / gain, elementwise.
Eigen::MatrixXd renormalize_noise(const VtsSweepDataset& data);

enum class Correction {
  none,       // N_rest / (2 G_W) neglected
  mean_gain,  // subtracted once with the mean WJPA gain
  per_point,  // folded into the regressor with each point's own gain
};

struct YFactorOptions {
  Correction correction = Correction::none;
  double n_rest = 0.0;                  // quanta, chain after the WJPA
  std::optional<double> mean_gain;      // default: mean of the point gains
  bool idler_folding = true;            // false: unpumped chain, y = G (N_in + N)
  bool weighted = false;                // inverse-variance weights from YFactorPoint::variance
};

struct YFactorPoint {
  double n_in = 0.0;
  double y = 0.0;
  double wjpa_gain = 1.0;
  double variance = 0.0;
};

struct YFactorFit {
  double slope = 0.0;
  double intercept = 0.0;
  double g_rest = 0.0;
  double n_add_ex = 0.0;
  double n_add = 0.0;
  double correction = 0.0;  // quanta subtracted from the uncorrected estimate
  double r2 = 0.0;
  bool negative_intercept = false;
};

YFactorFit yfactor_regression(std::span<const YFactorPoint> points, const YFactorOptions& options = {});

struct NoiseResult {
  Eigen::VectorXd freqs;
  Eigen::VectorXd n_add;      // NaN where masked or failed
  Eigen::VectorXd n_add_ex;
  Eigen::VectorXd g_rest;     // linear
  Eigen::VectorXd r2;         // NaN where masked or failed
  Eigen::VectorXd min_gain;   // lowest WJPA gain seen across temperatures
  std::vector<bool> masked;   // inside the pump guard band
  std::vector<std::string> errors;
};

struct PipelineOptions {
  YFactorOptions regression;
  int guard_bins = 3;
};

NoiseResult yfactor_pipeline(const VtsSweepDataset& data, const PipelineOptions& options = {});

}  // namespace wjpa

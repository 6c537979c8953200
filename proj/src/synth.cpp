#include "wjpa/synth.hpp"

#include <cmath>

namespace wjpa {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double fluctuation(Rng& rng, double samples) { return samples > 0.0 ? 1.0 + rng.normal() / std::sqrt(samples) : 1.0; }

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(splitmix64(seed)) {
  if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t Rng::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1DULL;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * constants::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

double CompressionLaw::gain(double n_in) const {
  const double n_th = std::max(n_in - 0.5, 0.0);
  return 1.0 + (g0 - 1.0) / (1.0 + n_th / n_sat);
}

void CompressionLaw::validate() const {
  detail::require(g0 >= 1.0, ErrorCode::InvalidArgument, "g0 must be >= 1");
  detail::require_positive(n_sat, "n_sat");
}

CompressionLaw CompressionLaw::from_endpoints(double g0, double g_end, double n_th_end) {
  detail::require(g0 > g_end && g_end > 1.0, ErrorCode::InvalidArgument, "need g0 > g_end > 1");
  detail::require_positive(n_th_end, "thermal occupation");
  return CompressionLaw{g0, n_th_end / ((g0 - 1.0) / (g_end - 1.0) - 1.0)};
}

void ChainScenario::validate() const {
  detail::require(vts_temps.size() > 0, ErrorCode::InvalidArgument, "scenario has no temperatures");
  for (Eigen::Index i = 1; i < vts_temps.size(); ++i) {
    detail::require(vts_temps(i) > vts_temps(i - 1), ErrorCode::InvalidArgument, "temperatures must increase");
  }
  detail::require(radiometer_samples >= 0.0, ErrorCode::InvalidArgument, "radiometer samples must be >= 0");
  detail::require_positive(rbw_hz, "rbw");
  for (const auto& s : stages) s.validate();
}

ChainScenario ChainScenario::nominal() {
  ChainScenario s;
  s.stages = {{"hemt", db_to_linear(40.0), 20.0}, {"room", db_to_linear(40.0), 300.0}};
  s.vts_temps = Eigen::VectorXd::LinSpaced(8, 0.1, 1.75);
  return s;
}

ComplexTrace simulate_vna_trace(const LinearMode& mode, const BackgroundModel& background, double noise_snr,
                                const Eigen::VectorXd& grid_hz, std::uint64_t seed) {
  mode.validate();
  detail::require_positive(noise_snr, "snr");
  Rng rng(seed);
  const double sigma = std::isinf(noise_snr) ? 0.0 : background.amp0 / (noise_snr * std::sqrt(2.0));
  Eigen::VectorXcd v(grid_hz.size());
  for (Eigen::Index i = 0; i < grid_hz.size(); ++i) {
    v(i) = background(grid_hz(i)) * linear_s11(mode, grid_hz(i));
    if (sigma > 0.0) {
      const double re = rng.normal();
      const double im = rng.normal();
      v(i) += sigma * std::complex<double>(re, im);
    }
  }
  return ComplexTrace(grid_hz, v);
}

VtsSweepDataset simulate_vts_sweep(const ChainScenario& scenario, double n_add_ex, const CompressionLaw& compression,
                                   const Eigen::VectorXd& freqs) {
  scenario.validate();
  compression.validate();
  detail::require(n_add_ex >= 0.0, ErrorCode::InvalidArgument, "added noise must be >= 0");
  const ChainTotals rest = scenario.stages.empty() ? ChainTotals{} : friis_chain(scenario.stages);

  VtsSweepDataset data;
  data.freqs = freqs;
  data.temps = scenario.vts_temps;
  data.rbw_hz = scenario.rbw_hz;
  data.pump_hz = scenario.pump_hz;
  const auto nt = data.temps.size();
  const auto nf = freqs.size();
  data.noise.resize(nt, nf);
  data.gain.resize(nt, nf);

  Rng rng(scenario.seed);
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < nf; ++j) {
      const double n_in = johnson_quanta(data.temps(i), freqs(j));
      double quanta = 0.0;
      double g = 1.0;
      if (scenario.wjpa_on) {
        g = compression.gain(n_in);
        quanta = rest.gain * (g * (2.0 * n_in + n_add_ex) + rest.added_noise);
      } else {
        quanta = rest.gain * (n_in + rest.added_noise);
      }
      data.gain(i, j) = g;
      data.noise(i, j) =
          quanta * constants::planck * freqs(j) * scenario.rbw_hz * fluctuation(rng, scenario.radiometer_samples);
    }
  }
  return data;
}

std::vector<RamseyFringe> simulate_ramsey_series(const DispersiveDevice& dev, const Eigen::VectorXd& powers_w,
                                                 double attenuation, double snr, std::uint64_t seed,
                                                 const RamseyOptions& options) {
  dev.validate();
  detail::require_positive(attenuation, "attenuation");
  detail::require_positive(snr, "snr");
  detail::require(options.points >= 8, ErrorCode::InvalidArgument, "fringe needs at least 8 points");
  Rng rng(seed);
  const double sigma = std::isinf(snr) ? 0.0 : options.amplitude / snr;
  const Eigen::VectorXd theta =
      Eigen::VectorXd::LinSpaced(options.points, 0.0, 2.0 * constants::pi * (options.points - 1) / options.points);

  std::vector<RamseyFringe> out;
  out.reserve(static_cast<std::size_t>(powers_w.size()));
  for (const double p : powers_w) {
    detail::require(p >= 0.0, ErrorCode::InvalidArgument, "drive power must be >= 0");
    // P_cavity = hbar omega_d |eps|^2 / kappa
    const double eps = std::sqrt(attenuation * p * dev.kappa / (constants::hbar * dev.omega_d));
    const double dphi = dev.tau * stark_shift(dev, eps);
    RamseyFringe f;
    f.theta = theta;
    f.signal.resize(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      f.signal(k) = options.amplitude * std::cos(theta(k) + dphi) + options.offset;
      if (sigma > 0.0) f.signal(k) += sigma * rng.normal();
    }
    out.push_back(std::move(f));
  }
  return out;
}

Spectrum simulate_output_spectrum(const std::vector<Tone>& tones, double floor_quanta, double g_sys_db,
                                  double omega_d, double rbw_hz, double span_hz, std::uint64_t seed,
                                  const SpectrumOptions& options) {
  detail::require(floor_quanta >= 0.0, ErrorCode::InvalidArgument, "floor must be >= 0");
  detail::require_positive(span_hz, "span");
  detail::require(options.points >= 2, ErrorCode::InvalidArgument, "spectrum needs at least two points");
  Rng rng(seed);
  Spectrum s;
  s.offset_hz = Eigen::VectorXd::LinSpaced(options.points, -0.5 * span_hz, 0.5 * span_hz);
  Eigen::VectorXd quanta = Eigen::VectorXd::Constant(options.points, floor_quanta);
  for (Eigen::Index i = 0; i < quanta.size(); ++i) quanta(i) *= std::max(fluctuation(rng, options.radiometer_samples), 0.0);
  for (const auto& t : tones) {
    detail::require(t.quanta >= 0.0, ErrorCode::InvalidArgument, "tone height must be >= 0");
    Eigen::Index bin = 0;
    (s.offset_hz.array() - t.offset_hz).abs().minCoeff(&bin);
    quanta(bin) += t.quanta;
  }
  s.p_w = quanta_to_spectrum(quanta, g_sys_db, omega_d, rbw_hz);
  return s;
}

}  // namespace wjpa

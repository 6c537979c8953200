#include <doctest.h>

#include <cstdint>

#include "wjpa/synth.hpp"

using namespace wjpa;

namespace {

// Reference xorshift64* with splitmix64 seeding, written out independently.
struct RefRng {
  std::uint64_t s;
  explicit RefRng(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    s = z ^ (z >> 31);
  }
  std::uint64_t next() {
    s ^= s >> 12;
    s ^= s << 25;
    s ^= s >> 27;
    return s * 2685821657736338717ULL;
  }
};

const double kF = 22e9;

CompressionLaw nominal_compression() {
  return CompressionLaw::from_endpoints(db_to_linear(21.6), db_to_linear(12.9), johnson_quanta(1.75, kF) - 0.5);
}

double rms_error(const NoiseResult& r, double truth) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < r.n_add.size(); ++j) acc += std::pow(r.n_add(j) - truth, 2);
  return std::sqrt(acc / r.n_add.size());
}

}  // namespace

TEST_CASE("rng sequence") {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xFFFFFFFFFFFFFFFFULL}) {
    Rng a(seed);
    RefRng b(seed);
    for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
  }
  Rng r(7);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_FALSE((u < 0.0 || u >= 1.0));
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("compression law") {
  const auto law = nominal_compression();
  CHECK(law.gain(0.5) == doctest::Approx(db_to_linear(21.6)));
  CHECK(linear_to_db(law.gain(johnson_quanta(1.75, kF))) == doctest::Approx(12.9).epsilon(1e-9));
  CHECK(law.n_sat == doctest::Approx(0.1786).epsilon(1e-3));
  const CompressionLaw off{100.0};
  CHECK(off.gain(5.0) == 100.0);
  CHECK_THROWS_AS(CompressionLaw::from_endpoints(10.0, 20.0, 1.0), Error);
}

TEST_CASE("vts sweep obeys the noise model exactly without noise") {
  ChainScenario sc = ChainScenario::nominal();
  const Eigen::VectorXd freqs = linear_grid(21e9, 23e9, 5);
  const CompressionLaw off{db_to_linear(21.6)};
  const auto d = simulate_vts_sweep(sc, 1.5, off, freqs);
  const auto rest = friis_chain(sc.stages);
  for (Eigen::Index i = 0; i < d.temps.size(); ++i) {
    for (Eigen::Index j = 0; j < freqs.size(); ++j) {
      const double n_in = johnson_quanta(d.temps(i), freqs(j));
      const double q = rest.gain * (off.g0 * (2.0 * n_in + 1.5) + rest.added_noise);
      CHECK(d.noise(i, j) == doctest::Approx(q * constants::planck * freqs(j) * sc.rbw_hz).epsilon(1e-12));
      if (i > 0) CHECK(d.noise(i, j) > d.noise(i - 1, j));
    }
  }
  const auto comp = simulate_vts_sweep(sc, 1.5, nominal_compression(), freqs);
  for (Eigen::Index j = 0; j < freqs.size(); ++j) {
    CHECK(comp.noise(comp.temps.size() - 1, j) < comp.noise(0, j));
    CHECK(linear_to_db(comp.gain(0, j)) == doctest::Approx(21.6).epsilon(1e-3));
  }
  sc.wjpa_on = false;
  const auto unp = simulate_vts_sweep(sc, 1.5, nominal_compression(), freqs);
  CHECK((unp.gain.array() == 1.0).all());
}

TEST_CASE("vts round trip and radiometer scaling") {
  const Eigen::VectorXd freqs = linear_grid(21e9, 23e9, 201);
  ChainScenario sc = ChainScenario::nominal();
  PipelineOptions opt;
  opt.regression.correction = Correction::per_point;
  opt.regression.n_rest = friis_chain(sc.stages).added_noise;

  sc.radiometer_samples = 1e6;
  const auto fine = yfactor_pipeline(simulate_vts_sweep(sc, 1.5, nominal_compression(), freqs), opt);
  for (Eigen::Index j = 0; j < freqs.size(); ++j) CHECK(fine.n_add(j) == doctest::Approx(2.0).epsilon(0.05));
  sc.radiometer_samples = 1e4;
  const auto coarse = yfactor_pipeline(simulate_vts_sweep(sc, 1.5, nominal_compression(), freqs), opt);
  const double ratio = rms_error(coarse, 2.0) / rms_error(fine, 2.0);
  CHECK(ratio > 7.0);
  CHECK(ratio < 14.0);

  // chain alone: unpumped regression sees the rest-of-chain noise
  sc.radiometer_samples = 0.0;
  sc.wjpa_on = false;
  PipelineOptions unp;
  unp.regression.idler_folding = false;
  const auto off = yfactor_pipeline(simulate_vts_sweep(sc, 0.0, CompressionLaw{}, freqs), unp);
  CHECK(off.n_add_ex(0) == doctest::Approx(friis_chain(sc.stages).added_noise).epsilon(1e-9));
}

TEST_CASE("generators are deterministic") {
  ChainScenario sc = ChainScenario::nominal();
  sc.radiometer_samples = 1e3;
  const Eigen::VectorXd freqs = linear_grid(21e9, 23e9, 11);
  const auto a = simulate_vts_sweep(sc, 1.5, nominal_compression(), freqs);
  const auto b = simulate_vts_sweep(sc, 1.5, nominal_compression(), freqs);
  CHECK(a.noise == b.noise);
  sc.seed = 2;
  CHECK(simulate_vts_sweep(sc, 1.5, nominal_compression(), freqs).noise != a.noise);

  const LinearMode m{21.5e9, 200e6, 10e6};
  BackgroundModel bg;
  bg.f_center = m.f_res;
  const Eigen::VectorXd grid = linear_grid(20.5e9, 22.5e9, 801);
  CHECK(simulate_vna_trace(m, bg, 100.0, grid, 3).values == simulate_vna_trace(m, bg, 100.0, grid, 3).values);
}

TEST_CASE("vna trace round trip") {
  const LinearMode m{21.5e9, 200e6, 10e6};
  BackgroundModel bg;
  bg.f_center = m.f_res;
  bg.amp0 = 0.1;
  bg.phase0 = -2.0;
  bg.phase_slope = 5e-9;
  const auto tr = simulate_vna_trace(m, bg, 300.0, linear_grid(20.5e9, 22.5e9, 1201), 11);
  const auto fit = fit_reflection(tr);
  CHECK(fit.mode.f_res == doctest::Approx(m.f_res).epsilon(1e-4));
  CHECK(fit.mode.kappa_ext == doctest::Approx(m.kappa_ext).epsilon(0.02));
  CHECK(fit.mode.kappa() == doctest::Approx(m.kappa()).epsilon(0.02));
  const auto clean = simulate_vna_trace(m, bg, std::numeric_limits<double>::infinity(), linear_grid(20.5e9, 22.5e9, 5), 1);
  CHECK(std::abs(clean.values(2) - bg(clean.freq_hz(2)) * linear_s11(m, clean.freq_hz(2))) < 1e-15);
}

TEST_CASE("ramsey series round trip") {
  DispersiveDevice dev;
  dev.omega_r = angular(21.765e9);
  dev.omega_d = angular(22e9);
  dev.chi = angular(-1e6);
  dev.kappa = angular(20e6);
  dev.tau = 5e-6;
  const double att = db_to_linear(-70.0);
  Eigen::VectorXd p(6);
  p << 0.0, dbm_to_watt(-50.0), dbm_to_watt(-45.0), dbm_to_watt(-42.0), dbm_to_watt(-40.0), dbm_to_watt(-38.5);
  const auto series = simulate_ramsey_series(dev, p, att, 100.0, 5);
  REQUIRE(series.size() == 6);
  std::vector<std::pair<double, double>> pts;
  Eigen::VectorXd raw(6);
  for (int i = 0; i < 6; ++i) raw(i) = ramsey_phase(series[i]).dphi;
  const Eigen::VectorXd ph = unwrap_phases(raw);
  CHECK(std::abs(ph(0)) < 1e-3);
  for (int i = 0; i < 6; ++i) {
    const double eps = std::sqrt(att * p(i) * dev.kappa / (constants::hbar * dev.omega_d));
    CHECK(std::abs(ph(i) - dev.tau * stark_shift(dev, eps)) < 1e-3);
    pts.emplace_back(p(i), ph(i));
  }
  // phase is linear in power
  CHECK(ph(2) / p(2) == doctest::Approx(ph(1) / p(1)).epsilon(0.01));
  const auto cal = stark_power_calibration(dev, std::span<const std::pair<double, double>>(pts).subspan(1));
  REQUIRE(cal.p_ratio.has_value());
  CHECK(*cal.p_ratio == doctest::Approx(att).epsilon(0.02));
  CHECK(simulate_ramsey_series(dev, p, att, 100.0, 5)[3].signal == series[3].signal);
}

TEST_CASE("output spectrum") {
  const double wd = angular(22e9);
  const auto s = simulate_output_spectrum({{0.0, 1e6}, {2e6, 50.0}}, 2.3, 96.8, wd, 4.7e3, 10e6, 1);
  CHECK(s.offset_hz.size() == 1001);
  const auto q = spectrum_to_quanta(s.p_w, 96.8, wd, 4.7e3);
  CHECK(q(0) == doctest::Approx(2.3).epsilon(1e-12));
  CHECK(q(500) == doctest::Approx(1e6 + 2.3).epsilon(1e-12));
  CHECK(q(700) == doctest::Approx(52.3).epsilon(1e-12));
  CHECK(watt_to_dbm(s.p_w(0)) == doctest::Approx(-61.22).epsilon(1e-3));
  const auto empty = simulate_output_spectrum({}, 0.0, 96.8, wd, 4.7e3, 10e6, 1);
  CHECK((empty.p_w.array() == 0.0).all());
  SpectrumOptions noisy;
  noisy.radiometer_samples = 100.0;
  const auto n = spectrum_to_quanta(simulate_output_spectrum({}, 2.3, 96.8, wd, 4.7e3, 10e6, 9, noisy).p_w, 96.8, wd, 4.7e3);
  CHECK(n.mean() == doctest::Approx(2.3).epsilon(0.02));
}

#include <doctest.h>

#include <random>

#include "oracles/reference.hpp"
#include "wjpa/paramp.hpp"

using namespace wjpa;

namespace {

const LinearMode kMode{21.5e9, 200e6, 0.0};
const double kKerr = -angular(1.8e6);

ComplexTrace noisy_trace(const LinearMode& m, const BackgroundModel& bg, double snr, Eigen::Index n, double half_span,
                         unsigned seed, bool conj = false) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const Eigen::VectorXd f = linear_grid(m.f_res - half_span, m.f_res + half_span, n);
  Eigen::VectorXcd v(n);
  const double sigma = bg.amp0 / (snr * std::sqrt(2.0));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::complex<double> s = bg(f(i)) * linear_s11(m, f(i));
    if (conj) s = std::conj(s);
    v(i) = s + std::complex<double>(sigma * z(gen), sigma * z(gen));
  }
  return ComplexTrace(f, v);
}

// Lossless gain at the pump frequency written out from the 2x2 response:
// |S_si|^2 = kappa^2 K^2 n^2 / det^2, G_s = 1 + |S_si|^2.
double closed_form_gain(double kappa, double kerr, double n, double dtilde) {
  const double det = kappa * kappa / 4.0 + dtilde * dtilde - kerr * kerr * n * n;
  return 1.0 + kappa * kappa * kerr * kerr * n * n / (det * det);
}

}  // namespace

TEST_CASE("linear reflection") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const LinearMode m{20e9 + 2e9 * u(gen), 50e6 + 300e6 * u(gen), 100e6 * u(gen)};
    const double f = m.f_res + (u(gen) - 0.5) * 2e9;
    CHECK(std::norm(linear_s11(m, f)) == doctest::Approx(oracle::lorentz_power(m.f_res, m.kappa_ext, m.kappa_int, f)));
    CHECK(std::abs(linear_s11(m, f)) <= 1.0 + 1e-12);
  }
  const LinearMode lossless{21e9, 200e6, 0.0};
  CHECK(std::abs(linear_s11(lossless, 21e9)) == doctest::Approx(1.0));
  CHECK(linear_s11(lossless, 21e9).real() == doctest::Approx(1.0));
  CHECK(linear_s11(lossless, 30e9).real() == doctest::Approx(-1.0).epsilon(1e-3));
  const LinearMode critical{21e9, 100e6, 100e6};
  CHECK(std::abs(linear_s11(critical, 21e9)) < 1e-12);
  CHECK(lossless.loaded_q() == doctest::Approx(105.0));
}

TEST_CASE("reflection fit recovers parameters") {
  const LinearMode truth{21.5e9, 200e6, 20e6};
  BackgroundModel bg;
  bg.f_center = truth.f_res;
  bg.amp0 = 0.3;
  bg.amp_slope = 1e-11;
  bg.phase0 = 1.1;
  bg.phase_slope = 2e-9;
  for (bool conj : {false, true}) {
    const auto fit = fit_reflection(noisy_trace(truth, bg, 200.0, 1601, 1.5e9, 7, conj));
    CHECK(fit.conjugate == conj);
    CHECK(fit.mode.f_res == doctest::Approx(truth.f_res).epsilon(1e-4));
    CHECK(fit.mode.kappa_ext == doctest::Approx(truth.kappa_ext).epsilon(0.02));
    CHECK(fit.mode.kappa_int == doctest::Approx(truth.kappa_int).epsilon(0.15));
    CHECK(fit.background.amp0 == doctest::Approx(0.3).epsilon(0.01));
  }
  // explicit guess gives the same answer
  const auto trace = noisy_trace(truth, bg, 200.0, 1601, 1.5e9, 8);
  const auto a = fit_reflection(trace);
  const auto b = fit_reflection(trace, LinearMode{21.45e9, 150e6, 50e6});
  CHECK(a.mode.f_res == doctest::Approx(b.mode.f_res).epsilon(1e-8));
  CHECK(a.mode.kappa_ext == doctest::Approx(b.mode.kappa_ext).epsilon(1e-5));

  const auto [f0, kappa] = locate_resonance(trace);
  CHECK(f0 == doctest::Approx(truth.f_res).epsilon(2e-3));
  CHECK(kappa == doctest::Approx(truth.kappa()).epsilon(0.3));
}

TEST_CASE("reflection fit failures") {
  const LinearMode truth{21.5e9, 200e6, 0.0};
  BackgroundModel bg;
  bg.f_center = truth.f_res;
  CHECK_THROWS_AS(fit_reflection(noisy_trace(truth, bg, 200.0, 40, 1e9, 1)), Error);
  try {
    fit_reflection(noisy_trace(truth, bg, 200.0, 401, 200e6, 1));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientSpan);
  }
  // flat line: nothing to fit
  const Eigen::VectorXd f = linear_grid(20e9, 23e9, 501);
  const Eigen::VectorXcd flat = Eigen::VectorXcd::Constant(501, {0.5, 0.2});
  try {
    fit_reflection(ComplexTrace(f, flat));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FitDiverged);
  }
}

TEST_CASE("flux map tunes downward") {
  const std::vector<double> flux{0.0, 0.1, 0.2, 0.3, 0.4};
  const auto map = flux_map(DeviceCircuit::nominal(), flux);
  REQUIRE(map.size() == flux.size());
  double prev = 1e99;
  for (const auto& pt : map) {
    REQUIRE(pt.mode.has_value());
    CHECK(pt.error.empty());
    CHECK(pt.mode->f_res < prev);
    prev = pt.mode->f_res;
  }
  CHECK(map.front().mode->f_res == doctest::Approx(21.5e9).epsilon(0.01));
  CHECK(map.front().mode->f_res - map.back().mode->f_res > 2e9);
  CHECK(map[1].l_j == doctest::Approx(squid_inductance(120e-12, 0.1)));
  const std::vector<double> bad{0.5};
  const auto fail = flux_map(DeviceCircuit::nominal(), bad);
  CHECK(!fail.front().mode.has_value());
  CHECK(!fail.front().error.empty());
}

TEST_CASE("pump steady state solves the cubic") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const double det_hz = (u(gen) * 2.0 - 1.5) * kMode.kappa();
    const double p = dbm_to_watt(-130.0 + 50.0 * u(gen));
    const PumpSetting ps{kMode.f_res + det_hz, p};
    for (Branch br : {Branch::low, Branch::high}) {
      const auto op = pump_steady_state(kMode, kKerr, ps, br);
      CHECK(pump_residual(kMode, kKerr, op) < 1e-9);
      // independent check of the cubic
      const double k = angular(kMode.kappa());
      const double lhs = op.n_p * (k * k / 4.0 + std::pow(op.delta_p - kKerr * op.n_p, 2));
      const double rhs = angular(kMode.kappa_ext) * p / (constants::hbar * angular(ps.f_pump));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
      CHECK(!op.roots.empty());
      CHECK(std::is_sorted(op.roots.begin(), op.roots.end()));
      CHECK(op.n_p == (br == Branch::low ? op.roots.front() : op.roots.back()));
    }
  }
  // deep red detuning with a softening Kerr shows three roots at moderate power
  bool saw_three = false;
  for (double dbm = -120.0; dbm < -80.0; dbm += 0.25) {
    const auto op = pump_steady_state(kMode, kKerr, {kMode.f_res - 2.0 * kMode.kappa(), dbm_to_watt(dbm)});
    saw_three |= op.roots.size() == 3;
  }
  CHECK(saw_three);
  // linear limit
  const auto lin = pump_steady_state(kMode, 0.0, {kMode.f_res, 1e-12});
  const double k = angular(kMode.kappa());
  CHECK(lin.n_p == doctest::Approx(angular(kMode.kappa_ext) * 1e-12 / (constants::hbar * angular(kMode.f_res)) /
                                   (k * k / 4.0)));
}

TEST_CASE("gain matches the closed form") {
  const double k = angular(kMode.kappa());
  std::mt19937_64 gen(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    const PumpSetting ps{kMode.f_res - (0.2 + 0.6 * u(gen)) * kMode.kappa(), dbm_to_watt(-115.0 + 25.0 * u(gen))};
    const auto op = pump_steady_state(kMode, kKerr, ps);
    if (is_unstable(kMode, kKerr, op)) continue;
    const double dtilde = op.delta_p - 2.0 * kKerr * op.n_p;
    const auto g = small_signal_gain(kMode, kKerr, op, 0.0);
    CHECK(g.signal == doctest::Approx(closed_form_gain(k, kKerr, op.n_p, dtilde)).epsilon(1e-9));
    const auto off = small_signal_gain(kMode, kKerr, op, angular(37e6 * (u(gen) - 0.5)));
    CHECK(off.signal - off.idler == doctest::Approx(1.0).epsilon(1e-9));
    ++checked;
  }
}

TEST_CASE("zero Kerr reduces to linear reflection") {
  const LinearMode lossy{21.5e9, 200e6, 30e6};
  const PumpSetting ps{21.45e9, dbm_to_watt(-90.0)};
  const auto op = pump_steady_state(lossy, 0.0, ps);
  double sup = 0.0;
  for (double off = -500e6; off <= 500e6; off += 7e6) {
    const auto g = small_signal_gain(lossy, 0.0, op, angular(off));
    sup = std::max(sup, std::abs(g.signal - std::norm(linear_s11(lossy, ps.f_pump + off))));
    CHECK(g.idler == 0.0);
  }
  CHECK(sup < 1e-10);
}

TEST_CASE("gain profile and bandwidth") {
  const double det = -kMode.kappa();
  double gbw_ref = 0.0;
  for (double target_db : {15.0, 20.0, 25.0}) {
    const auto ps = tune_pump_for_gain(kMode, kKerr, det, db_to_linear(target_db));
    const auto op = pump_steady_state(kMode, kKerr, ps);
    CHECK(!is_unstable(kMode, kKerr, op));
    CHECK(small_signal_gain(kMode, kKerr, op, 0.0).signal == doctest::Approx(db_to_linear(target_db)).epsilon(1e-6));
    const Eigen::VectorXd grid = linear_grid(ps.f_pump - 100e6, ps.f_pump + 100e6, 4001);
    const auto prof = gain_profile(kMode, kKerr, ps, grid);
    CHECK(prof.peak_gain == doctest::Approx(db_to_linear(target_db)).epsilon(1e-3));
    CHECK(prof.peak_freq == doctest::Approx(ps.f_pump).epsilon(1e-9));
    REQUIRE(prof.bandwidth_3db > 0.0);
    const double gbw = prof.bandwidth_3db * std::sqrt(prof.peak_gain);
    if (gbw_ref == 0.0) gbw_ref = gbw;
    CHECK(gbw == doctest::Approx(gbw_ref).epsilon(0.15));
    CHECK(gbw / kMode.kappa() == doctest::Approx(1.0).epsilon(0.05));
  }
  // symmetric about the pump
  const auto ps = tune_pump_for_gain(kMode, kKerr, det, 100.0);
  const auto op = pump_steady_state(kMode, kKerr, ps);
  for (double off : {1e6, 10e6, 50e6}) {
    CHECK(small_signal_gain(kMode, kKerr, op, angular(off)).signal ==
          doctest::Approx(small_signal_gain(kMode, kKerr, op, angular(-off)).signal).epsilon(1e-9));
  }
  CHECK_THROWS_AS(tune_pump_for_gain(kMode, 0.0, det, 100.0), Error);
  CHECK_THROWS_AS(tune_pump_for_gain(kMode, kKerr, det, 0.5), Error);
}

TEST_CASE("instability above threshold") {
  const double det = -kMode.kappa();
  const auto ps = tune_pump_for_gain(kMode, kKerr, det, 1000.0);
  PumpSetting over = ps;
  bool found = false;
  for (int i = 0; i < 400 && !found; ++i) {
    over.power_w *= 1.01;
    found = is_unstable(kMode, kKerr, pump_steady_state(kMode, kKerr, over, Branch::high));
  }
  if (found) {
    try {
      gain_profile(kMode, kKerr, over, linear_grid(ps.f_pump - 1e6, ps.f_pump + 1e6, 11), Branch::high);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnstableOperatingPoint);
    }
  }
  CHECK(!is_unstable(kMode, kKerr, pump_steady_state(kMode, kKerr, {kMode.f_res, 0.0})));
}

TEST_CASE("compression point") {
  const double det = -kMode.kappa();
  double prev = 1e99;
  for (double target_db : {14.0, 17.0, 20.0, 23.0}) {
    const auto ps = tune_pump_for_gain(kMode, kKerr, det, db_to_linear(target_db));
    const auto op = pump_steady_state(kMode, kKerr, ps);
    const auto r = p1db(kMode, kKerr, op);
    CHECK(linear_to_db(r.small_signal_gain) == doctest::Approx(target_db).epsilon(1e-3));
    CHECK(r.p1db_w < prev);
    prev = r.p1db_w;
    const double delta = angular(P1dbOptions{}.signal_offset_hz);
    CHECK(linear_to_db(saturated_gain(kMode, kKerr, op, delta, r.p1db_w)) ==
          doctest::Approx(target_db - 1.0).epsilon(1e-4));
    CHECK(saturated_gain(kMode, kKerr, op, delta, 1e-25) == doctest::Approx(r.small_signal_gain).epsilon(1e-4));
  }
  CHECK(watt_to_dbm(prev) == doctest::Approx(-123.65).epsilon(0.01));
}

TEST_CASE("p1db slope") {
  std::vector<std::pair<double, double>> line;
  for (int i = 0; i < 6; ++i) line.emplace_back(-100.0 + i, -120.0 + 0.7 * i);
  CHECK(p1db_slope(line) == doctest::Approx(0.7));
  line.resize(3);
  try {
    p1db_slope(line);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientPoints);
  }
}

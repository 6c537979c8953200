// wjpa: batch front end for the amplifier model, fitting and calibration
// pipelines. Every run writes <command>_run.json next to its outputs.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "wjpa/io.hpp"

#ifndef WJPA_VERSION
#define WJPA_VERSION "0.0.0"
#endif

namespace {

using namespace wjpa;
namespace fs = std::filesystem;
using io::json;
using io::Unit;

/// Usage problems: bad flags, missing files, unreadable configs. Exit 2.
struct UsageError : std::runtime_error {
  std::string code;
  UsageError(std::string c, const std::string& what) : std::runtime_error(what), code(std::move(c)) {}
};

std::string sha256_file(const fs::path& path) {
  const std::string data = io::read_text(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 failed for " + path.string());
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(',', start);
    const std::string item = s.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (!item.empty()) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw UsageError("InvalidArgument", "not a number list: '" + s + "'");
      }
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Globals {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string format;
};

/// Shared state of one run: effective config, inputs, outputs.
class Run {
 public:
  Run(std::string command, const Globals& g) : command_(std::move(command)) {
    if (!g.config_path.empty()) {
      add_input(g.config_path);
      config_ = io::load_config(g.config_path);
      if (!config_.is_object()) throw UsageError("InvalidArgument", "config root must be a table");
    } else {
      config_ = json::object();
    }
    if (!g.out_dir.empty()) out_dir_ = g.out_dir;
    else if (config_.contains("out_dir")) out_dir_ = config_.at("out_dir").get<std::string>();
    else if (const char* env = std::getenv("WJPA_OUT_DIR"); env && *env) out_dir_ = env;
    else out_dir_ = "out";
    seed_ = g.seed ? *g.seed : config_.value("seed", std::uint64_t{1});
    format_ = !g.format.empty() ? g.format : config_.value("format", std::string("csv"));
    if (format_ != "csv" && format_ != "json") throw UsageError("InvalidArgument", "format must be csv or json");
  }

  const json& section(const std::string& name) const {
    static const json empty = json::object();
    const auto it = config_.find(name);
    return it != config_.end() && it->is_object() ? *it : empty;
  }

  std::uint64_t seed() const { return seed_; }

  void add_input(const fs::path& p) {
    if (!fs::exists(p)) throw UsageError("MissingInput", "input not found: " + p.string());
    inputs_.push_back(p);
  }

  fs::path out_dir() const { return out_dir_; }
  void record_output(const std::string& name) { outputs_.push_back(name); }

  void param(const std::string& key, json value) { params_[key] = std::move(value); }

  fs::path out(const std::string& name) {
    const fs::path p = fs::path(out_dir_) / name;
    const auto canon = fs::weakly_canonical(p);
    for (const auto& in : inputs_) {
      if (fs::weakly_canonical(in) == canon) throw UsageError("InvalidArgument", "output would overwrite input " + in.string());
    }
    outputs_.push_back(name);
    return p;
  }

  void write_table(const std::string& stem, const io::Table& t) {
    if (format_ == "json") io::write_text(out(stem + ".json"), io::to_records(t).dump(2) + "\n");
    else io::write_text(out(stem + ".csv"), io::to_csv(t));
  }

  void write_json(const std::string& name, const json& j) { io::write_text(out(name), j.dump(2) + "\n"); }

  void finish() {
    json rec;
    rec["tool"] = "wjpa";
    rec["version"] = WJPA_VERSION;
    rec["command"] = command_;
    rec["seed"] = seed_;
    rec["format"] = format_;
    rec["inputs"] = json::array();
    for (const auto& in : inputs_) rec["inputs"].push_back({{"path", in.string()}, {"sha256", sha256_file(in)}});
    rec["parameters"] = params_;
    rec["outputs"] = outputs_;
    std::string name = command_;
    std::replace(name.begin(), name.end(), ' ', '_');
    io::write_text(fs::path(out_dir_) / (name + "_run.json"), rec.dump(2) + "\n");
  }

 private:
  std::string command_;
  json config_;
  std::string out_dir_;
  std::uint64_t seed_ = 1;
  std::string format_;
  std::vector<fs::path> inputs_;
  json params_ = json::object();
  std::vector<std::string> outputs_;
};

std::optional<double> gain_db_of(const json& sec, const char* base) {
  const auto g = io::quantity(sec, base, Unit::ratio);
  return g ? std::optional<double>(linear_to_db(*g)) : std::nullopt;
}

double pick(const std::optional<double>& flag, const json& sec, const char* base, Unit unit, double fallback) {
  if (flag) return *flag;
  return io::quantity(sec, base, unit).value_or(fallback);
}

std::vector<double> pick_list(const std::string& flag, const json& sec, const char* key, std::vector<double> fallback) {
  if (!flag.empty()) return parse_list(flag);
  if (sec.contains(key)) return sec.at(key).get<std::vector<double>>();
  return fallback;
}

// ---------------------------------------------------------------- circuit

struct CircuitReport {
  LinearMode mode;
  double residual = 0.0;
  double f_zero = 0.0;
  BbqResult bbq;
  double kerr = 0.0;
};

CircuitReport analyze_circuit(const DeviceCircuit& c, std::optional<std::pair<double, double>> bracket) {
  FluxMapOptions opt;
  const Eigen::VectorXd scan = linear_grid(opt.scan_lo_hz, opt.scan_hi_hz, opt.scan_points);
  const auto [fc, kappa] = locate_resonance(reflection_from_circuit(c, scan));
  const double half = opt.fit_half_span_linewidths * kappa;
  const auto fit = fit_reflection(reflection_from_circuit(c, linear_grid(std::max(fc - half, 1.0), fc + half, opt.fit_points)));
  CircuitReport r;
  r.mode = fit.mode;
  r.residual = fit.residual;
  const auto [lo, hi] = bracket.value_or(std::make_pair(0.95 * fit.mode.f_res, 1.05 * fit.mode.f_res));
  r.f_zero = find_resonance(c, lo, hi);
  r.bbq = bbq_from_circuit(c, r.f_zero);
  // participation above 1 means the stub dominates the slope; no junction Kerr then
  r.kerr = r.bbq.p <= 1.0 ? kerr_from_participation(r.bbq.p, r.f_zero, c.junction_inductance())
                          : std::numeric_limits<double>::quiet_NaN();
  return r;
}

json report_json(const CircuitReport& r) {
  return json{{"f_res_hz", r.mode.f_res},
              {"kappa_ext_hz", r.mode.kappa_ext},
              {"kappa_int_hz", r.mode.kappa_int},
              {"loaded_q", r.mode.loaded_q()},
              {"fit_residual", r.residual},
              {"im_y_zero_hz", r.f_zero},
              {"c_p_f", r.bbq.c_p},
              {"l_p_h", r.bbq.l_p},
              {"participation", r.bbq.p},
              {"kerr_hz", r.kerr / (2.0 * constants::pi)},
              {"q_times_p", r.mode.loaded_q() * r.bbq.p}};
}

// ---------------------------------------------------------------- options

struct TaperOpts {
  std::optional<double> points;
};

struct CircuitOpts {
  std::optional<double> f_lo, f_hi;
  std::string lj_sweep_ph;
  std::optional<double> points;
};

struct FitOpts {
  std::string input;
};

struct FluxOpts {
  std::optional<double> start, stop, points;
};

struct GainOpts {
  std::optional<double> detuning_hz, span_hz, points;
  std::string targets_db;
  std::string branch;
};

struct YOpts {
  std::string input;
  std::string correction;
  std::string reference;
  std::optional<double> n_rest, guard_bins;
  bool unpumped = false;
};

struct StarkOpts {
  std::string input;
  std::string spectrum;
  std::optional<double> g_sys_db, rbw_hz;
};

struct SynthOpts {
  std::optional<double> snr, f_lo, f_hi, points, n_add, attenuation_db, floor_quanta, g_sys_db, rbw_hz, span_hz;
  std::string powers_dbm;
  bool wjpa_off = false;
};

// ---------------------------------------------------------------- commands

void cmd_taper(Run& run, const TaperOpts& o) {
  const auto& sec = run.section("taper");
  const TaperSpec spec = io::taper_from_json(sec);
  const auto n = static_cast<Eigen::Index>(pick(o.points, sec, "points", Unit::ratio, 201));
  const Eigen::MatrixX2d curve = taper_curve(spec, n);
  run.param("taper", {{"waveguide_height_m", spec.waveguide_height}, {"slot_gap_m", spec.slot_gap}, {"length_m", spec.length}});
  run.param("points", n);
  run.write_table("taper", io::Table{{"x_m", "y_m"}, {curve.col(0), curve.col(1)}});
}

void cmd_circuit(Run& run, const CircuitOpts& o) {
  const auto& sec = run.section("circuit");
  const DeviceCircuit c = io::device_from_json(run.section("device"));
  std::optional<std::pair<double, double>> bracket;
  const auto lo = o.f_lo ? o.f_lo : io::quantity(sec, "f_lo", Unit::frequency);
  const auto hi = o.f_hi ? o.f_hi : io::quantity(sec, "f_hi", Unit::frequency);
  if (lo && hi) bracket = std::make_pair(*lo, *hi);
  else if (lo || hi) throw UsageError("InvalidArgument", "bracket needs both f_lo and f_hi");

  const CircuitReport r = analyze_circuit(c, bracket);
  json report = report_json(r);
  report["l_j_h"] = c.junction_inductance();
  report["plasma_frequency_hz"] = plasma_frequency(c.junction_inductance(), c.c_j);
  run.param("device", io::json{{"l_j0_h", c.l_j0}, {"c_j_f", c.c_j}, {"c_s_f", c.c_s}, {"c_c_f", c.c_c},
                               {"z_slot_ohm", c.z_slot}, {"stub_length_m", c.stub_length}, {"eff_index", c.eff_index},
                               {"flux", c.flux}});

  const auto n = static_cast<Eigen::Index>(pick(o.points, sec, "points", Unit::ratio, 2001));
  const double f0 = r.mode.f_res;
  const Eigen::VectorXd grid = linear_grid(0.8 * f0, 1.2 * f0, n);
  Eigen::VectorXd f_ok(grid.size());
  Eigen::Index kept = 0;
  std::vector<std::complex<double>> y;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    try {
      y.push_back(input_admittance(c, grid(i)));
      f_ok(kept++) = grid(i);
    } catch (const Error&) {
    }
  }
  const Eigen::VectorXcd yv = Eigen::Map<const Eigen::VectorXcd>(y.data(), kept);
  run.write_table("admittance", io::trace_table(ComplexTrace(f_ok.head(kept), yv)));
  run.write_table("reflection", io::trace_table(reflection_from_circuit(c, f_ok.head(kept))));

  const auto sweep = pick_list(o.lj_sweep_ph, sec, "lj_sweep_ph", {});
  if (!sweep.empty()) {
    const auto m = static_cast<Eigen::Index>(sweep.size());
    Eigen::VectorXd lj(m), fr(m), q(m), p(m), k(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      DeviceCircuit ci = c;
      ci.l_j0 = sweep[static_cast<std::size_t>(i)] * 1e-12;
      ci.flux = 0.0;
      const CircuitReport ri = analyze_circuit(ci, std::nullopt);
      lj(i) = ci.l_j0;
      fr(i) = ri.mode.f_res;
      q(i) = ri.mode.loaded_q();
      p(i) = ri.bbq.p;
      k(i) = ri.kerr / (2.0 * constants::pi);
    }
    run.write_table("lj_sweep", io::Table{{"l_j_h", "f_res_hz", "loaded_q", "participation", "kerr_hz"}, {lj, fr, q, p, k}});
  }
  run.write_json("circuit.json", report);
}

void cmd_fit(Run& run, const FitOpts& o) {
  run.add_input(o.input);
  const ComplexTrace trace = io::read_trace(o.input);
  std::optional<LinearMode> guess;
  if (const auto& g = run.section("guess"); !g.empty()) guess = io::mode_from_json(g);
  const ReflectionFit fit = fit_reflection(trace, guess);
  json j = io::to_json(fit.mode);
  j["residual"] = fit.residual;
  j["conjugate"] = fit.conjugate;
  j["background"] = {{"f_center_hz", fit.background.f_center}, {"amp0", fit.background.amp0},
                     {"amp_slope_per_hz", fit.background.amp_slope}, {"phase0_rad", fit.background.phase0},
                     {"phase_slope_rad_per_hz", fit.background.phase_slope}};
  run.write_json("fit.json", j);
  Eigen::VectorXcd model(trace.size());
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    auto s = linear_s11(fit.mode, trace.freq_hz(i));
    model(i) = fit.background(trace.freq_hz(i)) * (fit.conjugate ? std::conj(s) : s);
  }
  io::Table t{{"freq_hz", "re", "im", "model_re", "model_im"},
              {trace.freq_hz, trace.values.real(), trace.values.imag(), model.real(), model.imag()}};
  run.write_table("fit_model", t);
}

void cmd_fluxmap(Run& run, const FluxOpts& o) {
  const auto& sec = run.section("fluxmap");
  const DeviceCircuit c = io::device_from_json(run.section("device"));
  const double start = pick(o.start, sec, "flux_start", Unit::ratio, 0.0);
  const double stop = pick(o.stop, sec, "flux_stop", Unit::ratio, 0.45);
  const auto n = static_cast<Eigen::Index>(pick(o.points, sec, "flux_points", Unit::ratio, 10));
  run.param("flux", {{"start", start}, {"stop", stop}, {"points", n}});
  const Eigen::VectorXd grid = linear_grid(start, stop, n);
  const auto map = flux_map(c, std::span<const double>(grid.data(), static_cast<std::size_t>(grid.size())));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd phi(n), lj(n), fr(n), ke(n), ki(n), q(n), res(n);
  json errors = json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = map[static_cast<std::size_t>(i)];
    phi(i) = pt.flux;
    lj(i) = pt.l_j > 0.0 ? pt.l_j : nan;
    fr(i) = pt.mode ? pt.mode->f_res : nan;
    ke(i) = pt.mode ? pt.mode->kappa_ext : nan;
    ki(i) = pt.mode ? pt.mode->kappa_int : nan;
    q(i) = pt.mode ? pt.mode->loaded_q() : nan;
    res(i) = pt.mode ? pt.residual : nan;
    if (!pt.error.empty()) errors.push_back({{"flux", pt.flux}, {"error", pt.error}});
  }
  run.write_table("fluxmap", io::Table{{"flux", "l_j_h", "f_res_hz", "kappa_ext_hz", "kappa_int_hz", "loaded_q", "residual"},
                                       {phi, lj, fr, ke, ki, q, res}});
  run.write_json("fluxmap_errors.json", errors);
}

void cmd_gain(Run& run, const GainOpts& o) {
  const auto& sec = run.section("gain");
  LinearMode mode;
  double kerr = 0.0;
  if (const auto& m = run.section("mode"); !m.empty()) {
    mode = io::mode_from_json(m);
    kerr = angular(io::require_quantity(m, "kerr", Unit::frequency));
  } else {
    const CircuitReport r = analyze_circuit(io::device_from_json(run.section("device")), std::nullopt);
    mode = r.mode;
    kerr = r.kerr;
    if (!std::isfinite(kerr)) throw Error(ErrorCode::InvalidArgument, "circuit participation exceeds 1; give [mode] kerr explicitly");
  }
  const double detuning = pick(o.detuning_hz, sec, "pump_detuning", Unit::frequency, -mode.kappa());
  const double span = pick(o.span_hz, sec, "span", Unit::frequency, 2.0 * mode.kappa());
  const auto n = static_cast<Eigen::Index>(pick(o.points, sec, "points", Unit::ratio, 2001));
  const auto targets = pick_list(o.targets_db, sec, "targets_db", {14.0, 17.0, 20.0, 23.0});
  std::string branch_name = !o.branch.empty() ? o.branch : sec.value("branch", std::string("low"));
  if (branch_name != "low" && branch_name != "high") throw UsageError("InvalidArgument", "branch must be low or high");
  const Branch branch = branch_name == "low" ? Branch::low : Branch::high;
  run.param("mode", io::to_json(mode));
  run.param("kerr_hz", kerr / (2.0 * constants::pi));
  run.param("pump_detuning_hz", detuning);
  run.param("targets_db", targets);
  run.param("branch", branch_name);

  const auto m = static_cast<Eigen::Index>(targets.size());
  Eigen::VectorXd tgt(m), pump_dbm(m), peak_db(m), bw(m), peak_f(m), p1(m);
  std::vector<std::pair<double, double>> series;
  json summary = json::object();
  for (Eigen::Index i = 0; i < m; ++i) {
    tgt(i) = targets[static_cast<std::size_t>(i)];
    const PumpSetting pump = tune_pump_for_gain(mode, kerr, detuning, db_to_linear(tgt(i)));
    const Eigen::VectorXd grid = linear_grid(pump.f_pump - 0.5 * span, pump.f_pump + 0.5 * span, n);
    const GainResult g = gain_profile(mode, kerr, pump, grid, branch);
    const PumpOperatingPoint op = pump_steady_state(mode, kerr, pump, branch);
    const P1dbResult comp = p1db(mode, kerr, op);
    pump_dbm(i) = watt_to_dbm(pump.power_w);
    peak_db(i) = linear_to_db(g.peak_gain);
    bw(i) = g.bandwidth_3db;
    peak_f(i) = g.peak_freq;
    p1(i) = watt_to_dbm(comp.p1db_w);
    series.emplace_back(pump_dbm(i), p1(i));
    const Eigen::VectorXd gain_db = g.gain.unaryExpr([](double x) { return linear_to_db(x); });
    run.write_table("gain_" + io::format_number(tgt(i)) + "dB", io::Table{{"freq_hz", "gain_db"}, {grid, gain_db}});
  }
  run.write_table("p1db", io::Table{{"target_gain_db", "pump_dbm", "peak_gain_db", "peak_freq_hz", "bandwidth_hz", "p1db_dbm"},
                                    {tgt, pump_dbm, peak_db, peak_f, bw, p1}});
  try {
    summary["p1db_slope"] = p1db_slope(series);
  } catch (const Error& e) {
    summary["p1db_slope"] = nullptr;
    summary["p1db_slope_error"] = e.what();
  }
  summary["gain_bandwidth_product_hz"] = bw.size() ? bw(0) * std::sqrt(db_to_linear(peak_db(0))) : 0.0;
  run.write_json("gain.json", summary);
}

void cmd_yfactor(Run& run, const YOpts& o) {
  const auto& sec = run.section("yfactor");
  for (const auto& f : io::vts_dataset_files(o.input)) run.add_input(f);
  const VtsSweepDataset data = io::read_vts_dataset(o.input);
  PipelineOptions opt;
  const std::string corr = !o.correction.empty() ? o.correction : sec.value("correction", std::string("none"));
  if (corr == "none") opt.regression.correction = Correction::none;
  else if (corr == "mean_gain") opt.regression.correction = Correction::mean_gain;
  else if (corr == "per_point") opt.regression.correction = Correction::per_point;
  else throw UsageError("InvalidArgument", "correction must be none, mean_gain or per_point");
  opt.regression.idler_folding = !(o.unpumped || sec.value("unpumped", false));
  opt.guard_bins = static_cast<int>(pick(o.guard_bins, sec, "guard_bins", Unit::ratio, 3));
  const std::string reference = !o.reference.empty() ? o.reference : sec.value("reference", std::string());
  std::optional<double> chain_noise;
  if (!reference.empty()) {
    for (const auto& f : io::vts_dataset_files(reference)) run.add_input(f);
    PipelineOptions off;
    off.regression.idler_folding = false;
    off.guard_bins = opt.guard_bins;
    const NoiseResult rr = yfactor_pipeline(io::read_vts_dataset(reference), off);
    double acc = 0.0;
    int used = 0;
    for (Eigen::Index j = 0; j < rr.n_add_ex.size(); ++j) {
      if (std::isfinite(rr.n_add_ex(j))) {
        acc += rr.n_add_ex(j);
        ++used;
      }
    }
    if (used == 0) throw Error(ErrorCode::InsufficientPoints, "reference dataset gave no chain-noise estimate");
    chain_noise = acc / used;
  }
  // an explicit value beats the reference sweep
  opt.regression.n_rest = pick(o.n_rest, sec, "n_rest", Unit::ratio, chain_noise.value_or(0.0));
  run.param("correction", corr);
  run.param("n_rest", opt.regression.n_rest);
  if (!reference.empty()) run.param("reference", reference);
  run.param("unpumped", !opt.regression.idler_folding);
  run.param("guard_bins", opt.guard_bins);

  const NoiseResult r = yfactor_pipeline(data, opt);
  const auto nf = r.freqs.size();
  Eigen::VectorXd masked(nf), g_db(nf), min_g_db(nf);
  double sum = 0.0;
  int count = 0;
  json errors = json::array();
  for (Eigen::Index j = 0; j < nf; ++j) {
    masked(j) = r.masked[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    g_db(j) = linear_to_db(r.g_rest(j));
    min_g_db(j) = linear_to_db(r.min_gain(j));
    if (std::isfinite(r.n_add(j))) {
      sum += r.n_add(j);
      ++count;
    }
    if (!r.errors[static_cast<std::size_t>(j)].empty()) {
      errors.push_back({{"freq_hz", r.freqs(j)}, {"error", r.errors[static_cast<std::size_t>(j)]}});
    }
  }
  run.write_table("n_add", io::Table{{"freq_hz", "n_add", "n_add_ex", "g_rest_db", "r2", "min_wjpa_gain_db", "masked"},
                                     {r.freqs, r.n_add, r.n_add_ex, g_db, r.r2, min_g_db, masked}});
  json summary{{"mean_n_add", count ? json(sum / count) : json(nullptr)}, {"fitted_bins", count}, {"errors", errors}};
  run.write_json("yfactor.json", summary);
}

void cmd_starkcal(Run& run, const StarkOpts& o) {
  const auto& sec = run.section("stark");
  const DispersiveDevice dev = io::dispersive_from_json(sec);
  run.add_input(o.input);
  const auto entries = io::read_power_series(o.input);
  std::vector<std::pair<double, double>> series;
  for (const auto& e : entries) {
    run.add_input(e.fringe_file);
    series.emplace_back(e.p_rt_w, ramsey_phase(io::read_fringe(e.fringe_file)).dphi);
  }
  StarkOptions opt;
  opt.nonlinearity_tolerance = sec.value("nonlinearity_tolerance", opt.nonlinearity_tolerance);
  const StarkCalibration cal = stark_power_calibration(dev, series, opt);

  const auto n = static_cast<Eigen::Index>(series.size());
  Eigen::VectorXd p_dbm(n), shift(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p_dbm(i) = series[static_cast<std::size_t>(i)].first > 0.0 ? watt_to_dbm(series[static_cast<std::size_t>(i)].first)
                                                                 : io::kFloorDbm;
    shift(i) = cal.dphi_unwrapped(i) / dev.tau / (2.0 * constants::pi);
  }
  run.write_table("stark_series", io::Table{{"p_rt_dbm", "dphi_rad", "shift_hz"}, {p_dbm, cal.dphi_unwrapped, shift}});

  json report;
  report["dphase_dp_rad_per_w"] = cal.dphase_dp;
  report["p_ratio"] = cal.p_ratio ? json(*cal.p_ratio) : json(nullptr);
  report["far_detuned"] = cal.far_detuned;
  const std::optional<double> g_sys = o.g_sys_db ? o.g_sys_db : gain_db_of(sec, "g_sys");
  report["g_sys_db"] = g_sys ? json(*g_sys) : json(nullptr);
  if (!o.spectrum.empty()) {
    if (!g_sys) throw UsageError("InvalidArgument", "spectrum conversion needs g_sys_db");
    run.add_input(o.spectrum);
    const Spectrum s = io::read_spectrum(o.spectrum);
    const double rbw = pick(o.rbw_hz, sec, "rbw", Unit::frequency, 4.7e3);
    const Eigen::VectorXd q = spectrum_to_quanta(s.p_w, *g_sys, dev.omega_d, rbw);
    std::vector<double> sorted(q.data(), q.data() + q.size());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
    const double n_sys = sorted[sorted.size() / 2];
    const double f_d = dev.omega_d / (2.0 * constants::pi);
    report["rbw_hz"] = rbw;
    report["n_sys"] = n_sys;
    if (n_sys > 0.0) {
      report["t_sys_k"] = noise_temperature(n_sys, f_d);
      report["eta"] = efficiency(noise_temperature(n_sys, f_d), f_d);
    }
    run.write_table("spectrum_quanta", io::Table{{"offset_hz", "quanta"}, {s.offset_hz, q}});
  }
  run.write_json("starkcal.json", report);
}

void cmd_synth_vna(Run& run, const SynthOpts& o) {
  const auto& sec = run.section("synth_vna");
  const LinearMode mode = io::mode_from_json(run.section("mode"));
  BackgroundModel bg;
  const auto& b = run.section("background");
  bg.f_center = io::quantity(b, "f_center", Unit::frequency).value_or(mode.f_res);
  bg.amp0 = b.value("amp0", 1.0);
  bg.amp_slope = b.value("amp_slope_per_hz", 0.0);
  bg.phase0 = b.value("phase0_rad", 0.0);
  bg.phase_slope = b.value("phase_slope_rad_per_hz", 0.0);
  const double snr = pick(o.snr, sec, "snr", Unit::ratio, 100.0);
  const double lo = pick(o.f_lo, sec, "f_lo", Unit::frequency, mode.f_res - 5.0 * mode.kappa());
  const double hi = pick(o.f_hi, sec, "f_hi", Unit::frequency, mode.f_res + 5.0 * mode.kappa());
  const auto n = static_cast<Eigen::Index>(pick(o.points, sec, "points", Unit::ratio, 801));
  run.param("mode", io::to_json(mode));
  run.param("snr", snr);
  run.write_table("vna", io::trace_table(simulate_vna_trace(mode, bg, snr, linear_grid(lo, hi, n), run.seed())));
}

void cmd_synth_vts(Run& run, const SynthOpts& o) {
  const auto& sec = run.section("synth_vts");
  ChainScenario sc = io::scenario_from_json(run.section("scenario"));
  sc.seed = run.seed();
  if (o.wjpa_off) sc.wjpa_on = false;
  const double lo = pick(o.f_lo, sec, "f_lo", Unit::frequency, 21.5e9);
  const double hi = pick(o.f_hi, sec, "f_hi", Unit::frequency, 22.5e9);
  const auto n = static_cast<Eigen::Index>(pick(o.points, sec, "points", Unit::ratio, 101));
  const double n_add = pick(o.n_add, sec, "n_add", Unit::ratio, 2.0);
  if (auto v = io::quantity(sec, "rbw", Unit::frequency)) sc.rbw_hz = *v;
  const Eigen::VectorXd freqs = linear_grid(lo, hi, n);

  CompressionLaw law;
  const auto& c = run.section("compression");
  law.g0 = io::quantity(c, "g0", Unit::ratio).value_or(db_to_linear(21.6));
  if (auto v = io::quantity(c, "n_sat", Unit::ratio)) {
    law.n_sat = *v;
  } else if (c.value("enabled", true)) {
    // n_sat from the gain reached at the hottest temperature, mid band
    const double g_end = io::quantity(c, "g_end", Unit::ratio).value_or(db_to_linear(12.9));
    const double n_th = johnson_quanta(sc.vts_temps(sc.vts_temps.size() - 1), 0.5 * (lo + hi)) - 0.5;
    law = CompressionLaw::from_endpoints(law.g0, g_end, n_th);
  }
  run.param("n_add", n_add);
  run.param("compression", {{"g0", law.g0}, {"n_sat", std::isfinite(law.n_sat) ? json(law.n_sat) : json(nullptr)}});
  run.param("wjpa_on", sc.wjpa_on);
  const VtsSweepDataset data = simulate_vts_sweep(sc, n_add - 0.5, law, freqs);
  const fs::path dir = run.out_dir() / "vts";
  for (const auto& p : io::write_vts_dataset(dir, data)) run.record_output(fs::relative(p, run.out_dir()).string());
}

void cmd_synth_ramsey(Run& run, const SynthOpts& o) {
  const auto& sec = run.section("stark");
  const auto& ssec = run.section("synth_ramsey");
  const DispersiveDevice dev = io::dispersive_from_json(sec);
  const auto powers_dbm = pick_list(o.powers_dbm, ssec, "powers_dbm", {-50, -45, -42, -40, -38.5, -37.5, -36.5, -35.7});
  const double att = db_to_linear(-pick(o.attenuation_db, ssec, "attenuation_db", Unit::ratio, 70.0));
  const double snr = pick(o.snr, ssec, "snr", Unit::ratio, 100.0);
  RamseyOptions ro;
  ro.points = static_cast<Eigen::Index>(pick(o.points, ssec, "points", Unit::ratio, 4096));
  Eigen::VectorXd pw(static_cast<Eigen::Index>(powers_dbm.size()));
  for (std::size_t i = 0; i < powers_dbm.size(); ++i) pw(static_cast<Eigen::Index>(i)) = dbm_to_watt(powers_dbm[i]);
  run.param("powers_dbm", powers_dbm);
  run.param("attenuation_db", -linear_to_db(att));
  run.param("snr", snr);
  const auto fringes = simulate_ramsey_series(dev, pw, att, snr, run.seed(), ro);
  json manifest = json::array();
  for (std::size_t i = 0; i < fringes.size(); ++i) {
    const std::string name = "fringe_" + std::to_string(i) + ".csv";
    io::write_text(run.out("ramsey/" + name), io::to_csv(io::fringe_table(fringes[i])));
    manifest.push_back({{"p_rt_dbm", powers_dbm[i]}, {"fringe_file", name}});
  }
  run.write_json("ramsey/manifest.json", manifest);
}

void cmd_synth_spectrum(Run& run, const SynthOpts& o) {
  const auto& sec = run.section("synth_spectrum");
  std::vector<Tone> tones;
  if (auto it = sec.find("tones"); it != sec.end()) {
    for (const auto& t : *it) tones.push_back({io::require_quantity(t, "offset", Unit::frequency), t.value("quanta", 0.0)});
  }
  const double floor_q = pick(o.floor_quanta, sec, "floor_quanta", Unit::ratio, 2.3);
  const double g_sys = o.g_sys_db ? *o.g_sys_db : gain_db_of(sec, "g_sys").value_or(96.8);
  const double rbw = pick(o.rbw_hz, sec, "rbw", Unit::frequency, 4.7e3);
  const double span = pick(o.span_hz, sec, "span", Unit::frequency, 10e6);
  const double f_d = io::quantity(sec, "f_d", Unit::frequency).value_or(22e9);
  SpectrumOptions so;
  so.points = static_cast<Eigen::Index>(pick(o.points, sec, "points", Unit::ratio, 1001));
  so.radiometer_samples = sec.value("radiometer_samples", 0.0);
  run.param("floor_quanta", floor_q);
  run.param("g_sys_db", g_sys);
  run.param("rbw_hz", rbw);
  const Spectrum s = simulate_output_spectrum(tones, floor_q, g_sys, angular(f_d), rbw, span, run.seed(), so);
  run.write_table("spectrum", io::spectrum_table(s));
}

void emit_error(const std::string& command, const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}, {"command", command}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WJPA model, fitting and calibration pipelines", "wjpa"};
  app.set_version_flag("--version", WJPA_VERSION);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "TOML or JSON parameter file");
  app.add_option("--out-dir", g.out_dir, "output directory (default $WJPA_OUT_DIR or ./out)");
  app.add_option("--seed", g.seed, "random seed for generators");
  app.add_option("--format", g.format, "table format")->check(CLI::IsMember({"csv", "json"}));

  TaperOpts taper;
  auto* c_taper = app.add_subcommand("taper", "waveguide-to-slotline transition curve");
  c_taper->add_option("--points", taper.points);

  CircuitOpts circuit;
  auto* c_circuit = app.add_subcommand("circuit", "resonance, loaded Q and participation of the device circuit");
  c_circuit->add_option("--f-lo", circuit.f_lo, "Im(Y) root bracket start, Hz");
  c_circuit->add_option("--f-hi", circuit.f_hi, "Im(Y) root bracket end, Hz");
  c_circuit->add_option("--lj-sweep-ph", circuit.lj_sweep_ph, "comma-separated L_J0 values, pH");
  c_circuit->add_option("--points", circuit.points);

  FitOpts fit;
  auto* c_fit = app.add_subcommand("fit", "fit a one-port reflection trace");
  c_fit->add_option("--input", fit.input, "CSV trace")->required();

  FluxOpts flux;
  auto* c_flux = app.add_subcommand("fluxmap", "resonance versus flux bias");
  c_flux->add_option("--flux-start", flux.start);
  c_flux->add_option("--flux-stop", flux.stop);
  c_flux->add_option("--flux-points", flux.points);

  GainOpts gain;
  auto* c_gain = app.add_subcommand("gain", "gain profiles, P1dB table and slope");
  c_gain->add_option("--detuning-hz", gain.detuning_hz, "pump minus resonance, Hz");
  c_gain->add_option("--targets-db", gain.targets_db, "comma-separated target gains");
  c_gain->add_option("--span-hz", gain.span_hz);
  c_gain->add_option("--points", gain.points);
  c_gain->add_option("--branch", gain.branch)->check(CLI::IsMember({"low", "high"}));

  YOpts y;
  auto* c_y = app.add_subcommand("yfactor", "added noise from a VTS sweep");
  c_y->add_option("--input", y.input, "dataset directory or manifest")->required();
  c_y->add_option("--correction", y.correction)->check(CLI::IsMember({"none", "mean_gain", "per_point"}));
  c_y->add_option("--n-rest", y.n_rest, "added noise of the chain after the WJPA, quanta");
  c_y->add_option("--reference", y.reference, "WJPA-off dataset; sets --n-rest from its fitted chain noise");
  c_y->add_option("--guard-bins", y.guard_bins);
  c_y->add_flag("--unpumped", y.unpumped, "WJPA off: fit y = G (N_in + N)");

  StarkOpts stark;
  auto* c_stark = app.add_subcommand("starkcal", "Stark-shift power calibration and system noise");
  c_stark->add_option("--input", stark.input, "power-series manifest JSON")->required();
  c_stark->add_option("--spectrum", stark.spectrum, "analyzer spectrum CSV");
  c_stark->add_option("--g-sys-db", stark.g_sys_db);
  c_stark->add_option("--rbw-hz", stark.rbw_hz);

  SynthOpts synth;
  auto* c_synth = app.add_subcommand("synth", "generate synthetic datasets");
  c_synth->require_subcommand(1);
  auto* s_vna = c_synth->add_subcommand("vna", "reflection trace");
  s_vna->add_option("--snr", synth.snr);
  s_vna->add_option("--f-lo", synth.f_lo);
  s_vna->add_option("--f-hi", synth.f_hi);
  s_vna->add_option("--points", synth.points);
  auto* s_vts = c_synth->add_subcommand("vts", "VTS noise sweep");
  s_vts->add_option("--f-lo", synth.f_lo);
  s_vts->add_option("--f-hi", synth.f_hi);
  s_vts->add_option("--points", synth.points);
  s_vts->add_option("--n-add", synth.n_add, "true added noise, quanta");
  s_vts->add_flag("--wjpa-off", synth.wjpa_off);
  auto* s_ramsey = c_synth->add_subcommand("ramsey", "Ramsey fringe power series");
  s_ramsey->add_option("--powers-dbm", synth.powers_dbm);
  s_ramsey->add_option("--attenuation-db", synth.attenuation_db);
  s_ramsey->add_option("--snr", synth.snr);
  s_ramsey->add_option("--points", synth.points);
  auto* s_spec = c_synth->add_subcommand("spectrum", "analyzer output spectrum");
  s_spec->add_option("--floor-quanta", synth.floor_quanta);
  s_spec->add_option("--g-sys-db", synth.g_sys_db);
  s_spec->add_option("--rbw-hz", synth.rbw_hz);
  s_spec->add_option("--span-hz", synth.span_hz);
  s_spec->add_option("--points", synth.points);

  std::string command = "wjpa";
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error(command, "InvalidArgument", e.what());
    return 2;
  }

  try {
    auto* sub = app.get_subcommands().front();
    command = sub->get_name();
    if (sub == c_synth) command += " " + c_synth->get_subcommands().front()->get_name();
    Run run(command, g);
    if (sub == c_taper) cmd_taper(run, taper);
    else if (sub == c_circuit) cmd_circuit(run, circuit);
    else if (sub == c_fit) cmd_fit(run, fit);
    else if (sub == c_flux) cmd_fluxmap(run, flux);
    else if (sub == c_gain) cmd_gain(run, gain);
    else if (sub == c_y) cmd_yfactor(run, y);
    else if (sub == c_stark) cmd_starkcal(run, stark);
    else if (s_vna->parsed()) cmd_synth_vna(run, synth);
    else if (s_vts->parsed()) cmd_synth_vts(run, synth);
    else if (s_ramsey->parsed()) cmd_synth_ramsey(run, synth);
    else if (s_spec->parsed()) cmd_synth_spectrum(run, synth);
    run.finish();
  } catch (const UsageError& e) {
    emit_error(command, e.code, e.what());
    return 2;
  } catch (const Error& e) {
    emit_error(command, std::string(to_string(e.code())), e.what());
    return e.code() == ErrorCode::Io ? 2 : 1;
  } catch (const std::exception& e) {
    emit_error(command, "InvalidArgument", e.what());
    return 2;
  }
  return 0;
}

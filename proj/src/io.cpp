#include "wjpa/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <toml.hpp>

namespace wjpa::io {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& s, const fs::path& where) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::Io, where.string() + ": not a number: '" + s + "'");
  }
  return v;
}

using Scales = std::map<std::string, double, std::less<>>;

const Scales& scales(Unit unit) {
  static const std::map<Unit, Scales> table = {
      {Unit::frequency, {{"hz", 1.0}, {"khz", 1e3}, {"mhz", 1e6}, {"ghz", 1e9}}},
      {Unit::length, {{"m", 1.0}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}}},
      {Unit::capacitance, {{"f", 1.0}, {"nf", 1e-9}, {"pf", 1e-12}, {"ff", 1e-15}}},
      {Unit::inductance, {{"h", 1.0}, {"nh", 1e-9}, {"ph", 1e-12}}},
      {Unit::resistance, {{"ohm", 1.0}}},
      {Unit::conductance, {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}}},
      {Unit::power, {{"w", 1.0}, {"mw", 1e-3}}},
      {Unit::temperature, {{"k", 1.0}, {"mk", 1e-3}}},
      {Unit::time, {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}}},
      {Unit::ratio, {{"lin", 1.0}}},
  };
  return table.at(unit);
}

double as_number(const json& v, std::string_view key) {
  if (!v.is_number()) throw Error(ErrorCode::InvalidArgument, "config key '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw Error(ErrorCode::InvalidArgument, "unsupported TOML value (dates are not accepted)");
}

std::optional<Eigen::VectorXd> vector_of(const json& obj, std::string_view key) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return std::nullopt;
  if (!it->is_array()) throw Error(ErrorCode::InvalidArgument, "config key '" + std::string(key) + "' must be an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(it->size()));
  for (std::size_t i = 0; i < it->size(); ++i) out(static_cast<Eigen::Index>(i)) = as_number((*it)[i], key);
  return out;
}

fs::path resolve(const fs::path& base_dir, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : base_dir / p;
}

fs::path manifest_path(const fs::path& dir_or_manifest) {
  return fs::is_directory(dir_or_manifest) ? dir_or_manifest / "manifest.json" : dir_or_manifest;
}

std::string temp_tag(double t) { return "T" + format_number(t); }

double power_column(const Table& t, Eigen::Index i, const fs::path& path) {
  if (t.has("p_w")) return t.column("p_w")(i);
  if (t.has("p_dbm")) {
    const double dbm = t.column("p_dbm")(i);
    return dbm <= kFloorDbm ? 0.0 : dbm_to_watt(dbm);
  }
  throw Error(ErrorCode::Io, path.string() + ": expected a p_w or p_dbm column");
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const Eigen::VectorXd& Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return columns[i];
  }
  throw Error(ErrorCode::Io, "missing column '" + std::string(name) + "'");
}

bool Table::has(std::string_view name) const { return std::find(header.begin(), header.end(), name) != header.end(); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Table read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  Table t;
  std::vector<std::vector<double>> cols;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto fields = split(s);
    if (t.header.empty()) {
      t.header = std::move(fields);
      cols.resize(t.header.size());
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(t.header.size()) + " fields");
    }
    for (std::size_t i = 0; i < fields.size(); ++i) cols[i].push_back(parse_number(fields[i], path));
  }
  if (t.header.empty()) throw Error(ErrorCode::Io, path.string() + ": empty CSV");
  for (auto& c : cols) t.columns.emplace_back(Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
  return t;
}

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += table.header[i];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (i) out += ',';
      out += format_number(table.columns[i](r));
    }
    out += '\n';
  }
  return out;
}

json to_records(const Table& table) {
  json out = json::array();
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    json rec = json::object();
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      const double v = table.columns[i](r);
      rec[table.header[i]] = std::isfinite(v) ? json(v) : json(nullptr);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

ComplexTrace read_trace(const fs::path& path) {
  const Table t = read_csv(path);
  const auto& f = t.column("freq_hz");
  Eigen::VectorXcd v(f.size());
  if (t.has("re") && t.has("im")) {
    for (Eigen::Index i = 0; i < f.size(); ++i) v(i) = {t.column("re")(i), t.column("im")(i)};
  } else if (t.has("mag_db") && t.has("phase_deg")) {
    const auto& m = t.column("mag_db");
    const auto& p = t.column("phase_deg");
    for (Eigen::Index i = 0; i < f.size(); ++i) v(i) = std::polar(std::pow(10.0, m(i) / 20.0), p(i) * constants::pi / 180.0);
  } else {
    throw Error(ErrorCode::Io, path.string() + ": expected re,im or mag_db,phase_deg columns");
  }
  return ComplexTrace(f, v);
}

Table trace_table(const ComplexTrace& trace) {
  return Table{{"freq_hz", "re", "im"}, {trace.freq_hz, trace.values.real(), trace.values.imag()}};
}

json parse_toml(const std::string& text) {
  try {
    return toml_to_json(toml::parse(text));
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::Io, std::string("TOML parse error: ") + std::string(e.description()));
  }
}

json load_config(const fs::path& path) {
  const std::string text = read_text(path);
  if (lower(path.extension().string()) == ".toml") return parse_toml(text);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Io, std::string("JSON parse error: ") + e.what());
  }
}

std::optional<double> quantity(const json& obj, std::string_view base, Unit unit) {
  if (!obj.is_object()) return std::nullopt;
  std::optional<double> found;
  std::string found_key;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string key = it.key();
    std::optional<double> value;
    if (key == base) {
      value = as_number(*it, key);
    } else if (key.size() > base.size() + 1 && key.compare(0, base.size(), base) == 0 && key[base.size()] == '_') {
      const std::string suffix = lower(std::string_view(key).substr(base.size() + 1));
      if (unit == Unit::power && suffix == "dbm") {
        value = dbm_to_watt(as_number(*it, key));
      } else if (unit == Unit::ratio && suffix == "db") {
        value = db_to_linear(as_number(*it, key));
      } else if (const auto& s = scales(unit); s.count(suffix)) {
        value = as_number(*it, key) * s.find(suffix)->second;
      }
    }
    if (value) {
      if (found) throw Error(ErrorCode::InvalidArgument, "config gives both '" + found_key + "' and '" + key + "'");
      found = value;
      found_key = key;
    }
  }
  return found;
}

double require_quantity(const json& obj, std::string_view base, Unit unit) {
  const auto v = quantity(obj, base, unit);
  if (!v) throw Error(ErrorCode::InvalidArgument, "missing config key '" + std::string(base) + "_<unit>'");
  return *v;
}

DeviceCircuit device_from_json(const json& obj) {
  DeviceCircuit c = DeviceCircuit::nominal();
  if (auto v = quantity(obj, "l_j0", Unit::inductance)) c.l_j0 = *v;
  if (auto v = quantity(obj, "c_j", Unit::capacitance)) c.c_j = *v;
  if (auto v = quantity(obj, "c_s", Unit::capacitance)) c.c_s = *v;
  if (auto v = quantity(obj, "c_c", Unit::capacitance)) c.c_c = *v;
  if (auto v = quantity(obj, "z_slot", Unit::resistance)) c.z_slot = *v;
  c.port_impedance = c.z_slot;
  if (auto v = quantity(obj, "port_impedance", Unit::resistance)) c.port_impedance = *v;
  if (auto v = quantity(obj, "stub_length", Unit::length)) c.stub_length = *v;
  if (auto v = quantity(obj, "eff_index", Unit::ratio)) {
    c.eff_index = *v;
  } else {
    const double quarter = quantity(obj, "quarter_wave", Unit::frequency).value_or(21e9);
    c.eff_index = constants::speed_of_light / (4.0 * quarter * c.stub_length);
  }
  if (auto v = quantity(obj, "flux", Unit::ratio)) c.flux = *v;
  if (auto v = quantity(obj, "shunt_conductance", Unit::conductance)) c.shunt_conductance = *v;
  if (obj.contains("has_stub")) c.has_stub = obj.at("has_stub").get<bool>();
  c.validate();
  return c;
}

TaperSpec taper_from_json(const json& obj) {
  TaperSpec t = TaperSpec::wr42();
  if (auto v = quantity(obj, "waveguide_height", Unit::length)) t.waveguide_height = *v;
  if (auto v = quantity(obj, "slot_gap", Unit::length)) t.slot_gap = *v;
  if (auto v = quantity(obj, "length", Unit::length)) t.length = *v;
  t.validate();
  return t;
}

LinearMode mode_from_json(const json& obj) {
  LinearMode m;
  m.f_res = require_quantity(obj, "f_res", Unit::frequency);
  m.kappa_ext = require_quantity(obj, "kappa_ext", Unit::frequency);
  m.kappa_int = quantity(obj, "kappa_int", Unit::frequency).value_or(0.0);
  m.validate();
  return m;
}

json to_json(const LinearMode& mode) {
  return json{{"f_res_hz", mode.f_res},
              {"kappa_ext_hz", mode.kappa_ext},
              {"kappa_int_hz", mode.kappa_int},
              {"loaded_q", mode.loaded_q()}};
}

DispersiveDevice dispersive_from_json(const json& obj) {
  DispersiveDevice d;
  d.omega_r = angular(require_quantity(obj, "f_r", Unit::frequency));
  d.omega_d = angular(require_quantity(obj, "f_d", Unit::frequency));
  d.chi = angular(require_quantity(obj, "chi", Unit::frequency));
  d.kappa = angular(require_quantity(obj, "kappa", Unit::frequency));
  d.tau = require_quantity(obj, "tau", Unit::time);
  d.validate();
  return d;
}

ChainScenario scenario_from_json(const json& obj) {
  ChainScenario s = ChainScenario::nominal();
  if (auto it = obj.find("stages"); it != obj.end()) {
    s.stages.clear();
    for (const auto& st : *it) {
      ChainStage stage;
      stage.name = st.value("name", std::string("stage"));
      stage.gain = require_quantity(st, "gain", Unit::ratio);
      stage.added_noise = st.value("added_noise", 0.0);
      s.stages.push_back(stage);
    }
  }
  if (auto v = vector_of(obj, "vts_temps_k")) s.vts_temps = *v;
  if (obj.contains("seed")) s.seed = obj.at("seed").get<std::uint64_t>();
  s.radiometer_samples = obj.value("radiometer_samples", s.radiometer_samples);
  if (auto v = quantity(obj, "rbw", Unit::frequency)) s.rbw_hz = *v;
  s.wjpa_on = obj.value("wjpa_on", s.wjpa_on);
  if (auto v = quantity(obj, "pump", Unit::frequency)) s.pump_hz = *v;
  s.validate();
  return s;
}

VtsSweepDataset read_vts_dataset(const fs::path& dir_or_manifest) {
  const fs::path manifest = manifest_path(dir_or_manifest);
  const json m = load_config(manifest);
  const auto temps = vector_of(m, "temperatures_k");
  if (!temps || temps->size() == 0) throw Error(ErrorCode::Io, manifest.string() + ": missing temperatures_k");

  VtsSweepDataset data;
  data.temps = *temps;
  data.rbw_hz = quantity(m, "rbw", Unit::frequency).value_or(0.0);
  data.pump_hz = quantity(m, "pump", Unit::frequency);
  const auto files = vts_dataset_files(dir_or_manifest);
  const auto nt = data.temps.size();
  for (Eigen::Index i = 0; i < nt; ++i) {
    const fs::path noise_path = files[static_cast<std::size_t>(1 + 2 * i)];
    const fs::path gain_path = files[static_cast<std::size_t>(2 + 2 * i)];
    const Table noise = read_csv(noise_path);
    const Table gain = read_csv(gain_path);
    if (i == 0) {
      data.freqs = noise.column("freq_hz");
      data.noise.resize(nt, data.freqs.size());
      data.gain.resize(nt, data.freqs.size());
    }
    if (noise.rows() != data.freqs.size() || gain.rows() != data.freqs.size() ||
        noise.column("freq_hz") != data.freqs || gain.column("freq_hz") != data.freqs) {
      throw Error(ErrorCode::Io, "frequency grids differ between dataset files");
    }
    for (Eigen::Index j = 0; j < data.freqs.size(); ++j) {
      data.noise(i, j) = power_column(noise, j, noise_path);
      data.gain(i, j) = db_to_linear(gain.column("gain_db")(j));
    }
  }
  data.validate();
  return data;
}

std::vector<fs::path> vts_dataset_files(const fs::path& dir_or_manifest) {
  const fs::path manifest = manifest_path(dir_or_manifest);
  const fs::path dir = manifest.parent_path();
  const json m = load_config(manifest);
  const auto temps = vector_of(m, "temperatures_k").value_or(Eigen::VectorXd());
  std::vector<fs::path> out{manifest};
  const auto* noise_files = m.contains("noise_files") ? &m.at("noise_files") : nullptr;
  const auto* gain_files = m.contains("gain_files") ? &m.at("gain_files") : nullptr;
  for (Eigen::Index i = 0; i < temps.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const std::string tag = temp_tag(temps(i));
    out.push_back(noise_files ? resolve(dir, noise_files->at(ii).get<std::string>()) : dir / ("noise_" + tag + ".csv"));
    out.push_back(gain_files ? resolve(dir, gain_files->at(ii).get<std::string>()) : dir / ("gain_" + tag + ".csv"));
  }
  return out;
}

std::vector<fs::path> write_vts_dataset(const fs::path& dir, const VtsSweepDataset& data) {
  data.validate();
  json m;
  m["temperatures_k"] = std::vector<double>(data.temps.data(), data.temps.data() + data.temps.size());
  m["rbw_hz"] = data.rbw_hz;
  if (data.pump_hz) m["pump_hz"] = *data.pump_hz;
  json noise_files = json::array(), gain_files = json::array();
  std::vector<fs::path> written;
  for (Eigen::Index i = 0; i < data.temps.size(); ++i) {
    const std::string tag = temp_tag(data.temps(i));
    const std::string nf = "noise_" + tag + ".csv", gf = "gain_" + tag + ".csv";
    noise_files.push_back(nf);
    gain_files.push_back(gf);
    const Eigen::VectorXd gain_db = data.gain.row(i).transpose().unaryExpr([](double g) { return linear_to_db(g); });
    write_text(dir / nf, to_csv(Table{{"freq_hz", "p_w"}, {data.freqs, data.noise.row(i).transpose()}}));
    write_text(dir / gf, to_csv(Table{{"freq_hz", "gain_db"}, {data.freqs, gain_db}}));
    written.push_back(dir / nf);
    written.push_back(dir / gf);
  }
  m["noise_files"] = noise_files;
  m["gain_files"] = gain_files;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  written.insert(written.begin(), dir / "manifest.json");
  return written;
}

RamseyFringe read_fringe(const fs::path& path) {
  const Table t = read_csv(path);
  RamseyFringe f{t.column("theta_rad"), t.column("signal")};
  f.validate();
  return f;
}

Table fringe_table(const RamseyFringe& fringe) { return Table{{"theta_rad", "signal"}, {fringe.theta, fringe.signal}}; }

std::vector<PowerSeriesEntry> read_power_series(const fs::path& manifest) {
  const json m = load_config(manifest);
  if (!m.is_array()) throw Error(ErrorCode::Io, manifest.string() + ": power series manifest must be a JSON array");
  std::vector<PowerSeriesEntry> out;
  for (const auto& e : m) {
    PowerSeriesEntry entry;
    entry.p_rt_w = require_quantity(e, "p_rt", Unit::power);
    entry.fringe_file = resolve(manifest.parent_path(), e.at("fringe_file").get<std::string>());
    out.push_back(entry);
  }
  return out;
}

Spectrum read_spectrum(const fs::path& path) {
  const Table t = read_csv(path);
  Spectrum s;
  s.offset_hz = t.column("offset_hz");
  s.p_w.resize(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) s.p_w(i) = power_column(t, i, path);
  return s;
}

Table spectrum_table(const Spectrum& spectrum) {
  const Eigen::VectorXd dbm =
      spectrum.p_w.unaryExpr([](double w) { return w > 0.0 ? std::max(watt_to_dbm(w), kFloorDbm) : kFloorDbm; });
  return Table{{"offset_hz", "p_dbm"}, {spectrum.offset_hz, dbm}};
}

}  // namespace wjpa::io

#pragma once

// File formats: CSV tables, unit-suffixed JSON/TOML configs, VTS dataset
// directories, Ramsey power-series manifests and analyzer spectra.

#include <Eigen/Dense>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wjpa/circuit.hpp"
#include "wjpa/noisecal.hpp"
#include "wjpa/paramp.hpp"
#include "wjpa/qubitcal.hpp"
#include "wjpa/synth.hpp"
#include "wjpa/trace.hpp"

namespace wjpa::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Lowest power written to or accepted from dBm columns.
inline constexpr double kFloorDbm = -300.0;

/// Shortest round-trip decimal form.
std::string format_number(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<Eigen::VectorXd> columns;

  Eigen::Index rows() const { return columns.empty() ? 0 : columns.front().size(); }
  const Eigen::VectorXd& column(std::string_view name) const;
  bool has(std::string_view name) const;
};

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

Table read_csv(const fs::path& path);
std::string to_csv(const Table& table);
/// Array of {column: value} records.
json to_records(const Table& table);

/// `freq_hz,re,im` or `freq_hz,mag_db,phase_deg`, picked by header.
ComplexTrace read_trace(const fs::path& path);
Table trace_table(const ComplexTrace& trace);

/// JSON, or TOML when the extension is .toml.
json load_config(const fs::path& path);
json parse_toml(const std::string& text);

enum class Unit { frequency, length, capacitance, inductance, resistance, conductance, power, temperature, time, ratio };

/// Reads `<base>_<suffix>` with any suffix known for the unit (e.g. l_j0_pH,
/// stub_length_mm, p_pump_dbm) and returns SI. A bare `<base>` is SI.
std::optional<double> quantity(const json& obj, std::string_view base, Unit unit);
double require_quantity(const json& obj, std::string_view base, Unit unit);

DeviceCircuit device_from_json(const json& obj);
TaperSpec taper_from_json(const json& obj);
LinearMode mode_from_json(const json& obj);
DispersiveDevice dispersive_from_json(const json& obj);
ChainScenario scenario_from_json(const json& obj);
json to_json(const LinearMode& mode);

/// Directory holding manifest.json plus noise_T<K>.csv / gain_T<K>.csv.
VtsSweepDataset read_vts_dataset(const fs::path& dir_or_manifest);
std::vector<fs::path> write_vts_dataset(const fs::path& dir, const VtsSweepDataset& data);
/// Files a dataset directory references, for hashing.
std::vector<fs::path> vts_dataset_files(const fs::path& dir_or_manifest);

RamseyFringe read_fringe(const fs::path& path);
Table fringe_table(const RamseyFringe& fringe);

struct PowerSeriesEntry {
  double p_rt_w = 0.0;
  fs::path fringe_file;
};
/// JSON array of {p_rt_dbm | p_rt_w, fringe_file}; paths relative to the manifest.
std::vector<PowerSeriesEntry> read_power_series(const fs::path& manifest);

/// `offset_hz,p_dbm` or `offset_hz,p_w`.
Spectrum read_spectrum(const fs::path& path);
Table spectrum_table(const Spectrum& spectrum);

}  // namespace wjpa::io

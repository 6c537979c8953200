#include <doctest.h>

#include <unistd.h>

#include <filesystem>

#include "wjpa/io.hpp"

using namespace wjpa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("wjpa_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("number formatting round trips") {
  for (double v : {0.0, 1.0, -2.5, 1.0 / 3.0, 6.62607015e-34, 21.5e9, 1e300}) {
    CHECK(std::stod(io::format_number(v)) == v);
  }
  CHECK(io::format_number(0.5) == "0.5");
}

TEST_CASE("csv tables") {
  TempDir tmp;
  io::Table t{{"a", "b"}, {Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.1, -0.2, 1e-20)}};
  io::write_text(tmp.path / "sub" / "t.csv", "# comment\n" + io::to_csv(t));
  const auto back = io::read_csv(tmp.path / "sub" / "t.csv");
  CHECK(back.header == t.header);
  CHECK(back.column("b") == t.column("b"));
  CHECK(back.has("a"));
  CHECK(!back.has("c"));
  CHECK_THROWS_AS(back.column("c"), Error);
  const auto rec = io::to_records(t);
  CHECK(rec.size() == 3);
  CHECK(rec[2]["b"].get<double>() == 1e-20);

  io::write_text(tmp.path / "bad.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(io::read_csv(tmp.path / "bad.csv"), Error);
  io::write_text(tmp.path / "nan.csv", "a\nfoo\n");
  CHECK_THROWS_AS(io::read_csv(tmp.path / "nan.csv"), Error);
  try {
    io::read_csv(tmp.path / "missing.csv");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("trace formats") {
  TempDir tmp;
  const Eigen::VectorXd f = linear_grid(20e9, 21e9, 5);
  Eigen::VectorXcd v(5);
  for (int i = 0; i < 5; ++i) v(i) = std::polar(0.5 + 0.1 * i, 0.3 * i - 0.6);
  const ComplexTrace tr(f, v);
  io::write_text(tmp.path / "ri.csv", io::to_csv(io::trace_table(tr)));
  const auto a = io::read_trace(tmp.path / "ri.csv");
  CHECK(a.values == v);
  std::string polar = "freq_hz,mag_db,phase_deg\n";
  for (int i = 0; i < 5; ++i) {
    polar += io::format_number(f(i)) + "," + io::format_number(20.0 * std::log10(std::abs(v(i)))) + "," +
             io::format_number(std::arg(v(i)) * 180.0 / constants::pi) + "\n";
  }
  io::write_text(tmp.path / "mp.csv", polar);
  const auto b = io::read_trace(tmp.path / "mp.csv");
  for (int i = 0; i < 5; ++i) CHECK(std::abs(b.values(i) - v(i)) < 1e-12);
}

TEST_CASE("config quantities and units") {
  const auto cfg = io::parse_toml(R"(
[device]
l_j0_pH = 130
c_c_fF = 20
stub_length_mm = 1.2
z_slot_ohm = 100
flux = 0.1

[pump]
power_dbm = -90
f_GHz = 21.3
)");
  const auto dev = io::device_from_json(cfg["device"]);
  CHECK(dev.l_j0 == doctest::Approx(130e-12));
  CHECK(dev.c_c == doctest::Approx(20e-15));
  CHECK(dev.stub_length == doctest::Approx(1.2e-3));
  CHECK(dev.z_slot == doctest::Approx(100.0));
  CHECK(dev.flux == doctest::Approx(0.1));
  CHECK(dev.c_j == DeviceCircuit::nominal().c_j);
  CHECK(*io::quantity(cfg["pump"], "power", io::Unit::power) == doctest::Approx(1e-12));
  CHECK(*io::quantity(cfg["pump"], "f", io::Unit::frequency) == doctest::Approx(21.3e9));
  CHECK(!io::quantity(cfg["pump"], "missing", io::Unit::power).has_value());
  CHECK_THROWS_AS(io::require_quantity(cfg["pump"], "missing", io::Unit::power), Error);

  const io::json dup = {{"power_dbm", -90.0}, {"power_w", 1.0}};
  CHECK_THROWS_AS(io::quantity(dup, "power", io::Unit::power), Error);
  const io::json bare = {{"power", 1e-6}};
  CHECK(*io::quantity(bare, "power", io::Unit::power) == 1e-6);
  CHECK_THROWS_AS(io::parse_toml("a = ["), Error);

  const auto mode = io::mode_from_json(io::json{{"f_res_GHz", 21.5}, {"kappa_ext_MHz", 200}});
  CHECK(mode.f_res == doctest::Approx(21.5e9));
  CHECK(mode.kappa_ext == doctest::Approx(200e6));
  CHECK(mode.kappa_int == 0.0);
  const auto j = io::to_json(mode);
  CHECK(io::mode_from_json(j).f_res == mode.f_res);
}

TEST_CASE("vts dataset round trip") {
  TempDir tmp;
  VtsSweepDataset d;
  d.freqs = linear_grid(21e9, 22e9, 6);
  d.temps = Eigen::Vector3d(0.1, 0.8, 1.75);
  d.noise = (Eigen::MatrixXd::Random(3, 6).array() + 2.0) * 1e-12;
  d.gain = Eigen::MatrixXd::Random(3, 6).array() + 100.0;
  d.rbw_hz = 1e6;
  d.pump_hz = 21.5e9;
  const auto files = io::write_vts_dataset(tmp.path / "vts", d);
  CHECK(files.size() == 7);
  const auto back = io::read_vts_dataset(tmp.path / "vts");
  CHECK(back.temps == d.temps);
  CHECK(back.freqs == d.freqs);
  CHECK(back.noise.isApprox(d.noise, 1e-12));
  CHECK(back.gain.isApprox(d.gain, 1e-12));
  CHECK(back.rbw_hz == d.rbw_hz);
  CHECK(*back.pump_hz == *d.pump_hz);
  CHECK(io::vts_dataset_files(tmp.path / "vts" / "manifest.json").size() == 7);
  fs::remove(files[1]);
  CHECK_THROWS_AS(io::read_vts_dataset(tmp.path / "vts"), Error);
}

TEST_CASE("fringes, power series and spectra") {
  TempDir tmp;
  RamseyFringe f;
  f.theta = Eigen::VectorXd::LinSpaced(16, 0.0, 6.0);
  f.signal = f.theta.array().cos();
  io::write_text(tmp.path / "f0.csv", io::to_csv(io::fringe_table(f)));
  CHECK(io::read_fringe(tmp.path / "f0.csv").signal == f.signal);
  io::write_text(tmp.path / "series.json",
                 R"([{"p_rt_dbm": -40, "fringe_file": "f0.csv"}, {"p_rt_w": 2e-7, "fringe_file": "f0.csv"}])");
  const auto series = io::read_power_series(tmp.path / "series.json");
  REQUIRE(series.size() == 2);
  CHECK(series[0].p_rt_w == doctest::Approx(1e-7));
  CHECK(series[1].p_rt_w == 2e-7);
  CHECK(series[0].fringe_file == tmp.path / "f0.csv");

  Spectrum s;
  s.offset_hz = Eigen::Vector3d(-1.0, 0.0, 1.0);
  s.p_w = Eigen::Vector3d(1e-10, 0.0, 3e-9);
  io::write_text(tmp.path / "s.csv", io::to_csv(io::spectrum_table(s)));
  const auto sb = io::read_spectrum(tmp.path / "s.csv");
  CHECK(sb.p_w(0) == doctest::Approx(1e-10).epsilon(1e-12));
  CHECK(sb.p_w(1) == 0.0);
  CHECK(sb.p_w(2) == doctest::Approx(3e-9).epsilon(1e-12));
}

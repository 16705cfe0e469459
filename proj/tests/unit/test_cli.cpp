#include "catch_amalgamated.hpp"

#include "wgqed/analysis.hpp"
#include "wgqed/cli.hpp"
#include "wgqed/dynamics.hpp"
#include "wgqed/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

using namespace wgqed;
using Catch::Matchers::ContainsSubstring;

namespace fs = std::filesystem;

namespace {

ExperimentConfig bundled(const std::string& name) {
  return load_config(std::string(WGQED_CONFIG_DIR) + "/" + name);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wgqed_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

const std::vector<double>& column(const std::vector<CsvColumn>& cols, const std::string& name) {
  for (const auto& c : cols)
    if (c.name == name) return c.values;
  FAIL("missing column " << name);
  return cols.front().values;
}

int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "wgqed");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir(name) / "run.ini";
  write_text_file(p.string(), text);
  return p.string();
}

}  // namespace

TEST_CASE("config parse errors carry line numbers", "[cli][config]") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK_THAT(message("[system]\n\ngamma1_ghz = 0.7\ngama2_ghz = 0.7\n"),
             ContainsSubstring("line 4") && ContainsSubstring("gama2_ghz"));
  CHECK_THAT(message("# header\n[sytem]\n"), ContainsSubstring("line 2") && ContainsSubstring("sytem"));
  CHECK_THAT(message("[system]\nbeta1 = 0.5\nbeta1 = 0.6\n"), ContainsSubstring("line 3") && ContainsSubstring("duplicate"));
  CHECK_THAT(message("[system]\nbeta1 = half\n"), ContainsSubstring("line 2") && ContainsSubstring("beta1"));
  CHECK_THAT(message("[drive]\nmode = cw\nomega1_ghz\n"), ContainsSubstring("line 3"));
  CHECK_THAT(message("gamma1_ghz = 0.7\n"), ContainsSubstring("line 1"));
  // Physical validation runs at load.
  CHECK_THAT(message("[system]\nbeta2 = 1.5\n"), ContainsSubstring("[system]"));
  CHECK_THAT(message("[drive]\nmode = burst\n"), ContainsSubstring("[drive]"));
  CHECK_THAT(message("[sweep]\naxis = temperature\n"), ContainsSubstring("[sweep]"));
}

TEST_CASE("config comments and defaults", "[cli][config]") {
  const ExperimentConfig c = parse_config("; leading comment\n[system]  # trailing\nbeta2 = 0.5 ; inline\n");
  ExperimentConfig expected;
  expected.beta2 = 0.5;
  CHECK(c == expected);
}

TEST_CASE("echoed config reloads to an equal configuration", "[cli][config]") {
  for (const char* name : {"fig1e_resonant.ini", "fig1e_detuned.ini", "lifetime_in_phase.ini",
                           "lifetime_out_of_phase.ini", "lifetime_detuned.ini", "steadystate_map.ini",
                           "waveplate.ini", "rabi.ini"}) {
    INFO(name);
    const ExperimentConfig c = bundled(name);
    CHECK(parse_config(to_ini(c)) == c);
  }
  ExperimentConfig odd;
  odd.gamma1_ghz = 0.1 + 0.2;
  odd.coupling_phase = std::nextafter(1.0, 2.0);
  odd.sweep = {"beta2", 0.0, 1.0, 7};
  odd.fit_data = "some dir/trace.csv";
  CHECK(parse_config(to_ini(odd)) == odd);

  // The manifest carries the same echo.
  const fs::path dir = scratch_dir("echo");
  REQUIRE(run({"waveplate-map", "--config", std::string(WGQED_CONFIG_DIR) + "/waveplate.ini", "--out", dir.string()}) == 0);
  const auto manifest = nlohmann::json::parse(read_text_file((dir / "manifest.json").string()));
  ExperimentConfig expected = bundled("waveplate.ini");
  expected.directory = dir.string();
  CHECK(parse_config(manifest["config"].get<std::string>()) == expected);
}

TEST_CASE("outputs are deterministic", "[cli]") {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  const std::string cfg = std::string(WGQED_CONFIG_DIR) + "/fig1e_resonant.ini";
  REQUIRE(run({"g2", "--config", cfg, "--out", a.string(), "--threads", "1"}) == 0);
  REQUIRE(run({"g2", "--config", cfg, "--out", b.string(), "--threads", "3"}) == 0);
  const auto ma = nlohmann::json::parse(read_text_file((a / "manifest.json").string()));
  const auto mb = nlohmann::json::parse(read_text_file((b / "manifest.json").string()));
  REQUIRE(ma["files"].size() == mb["files"].size());
  for (std::size_t k = 0; k < ma["files"].size(); ++k) {
    const std::string name = ma["files"][k]["name"];
    CHECK(ma["files"][k]["sha256"] == mb["files"][k]["sha256"]);
    CHECK(read_text_file((a / name).string()) == read_text_file((b / name).string()));
    CHECK(sha256_hex(read_text_file((a / name).string())) == ma["files"][k]["sha256"]);
  }

  // Sweeps assemble in value order whatever the worker count.
  ExperimentConfig sweep = bundled("fig1e_resonant.ini");
  sweep.tau_start_ns = -1.0;
  sweep.tau_stop_ns = 1.0;
  sweep.tau_step_ns = 0.02;
  sweep.sweep = {"beta2", 0.0, 1.0, 5};
  CHECK(cmd_g2(sweep, 1).file("g2_sweep.csv").content == cmd_g2(sweep, 4).file("g2_sweep.csv").content);
}

TEST_CASE("g2 outputs", "[cli][g2]") {
  ExperimentConfig c = bundled("fig1e_resonant.ini");
  const CommandResult r = cmd_g2(c, 0);
  std::istringstream csv(r.file("g2.csv").content);
  const FitData d = read_fit_csv(csv);
  CHECK(d.x.front() == Catch::Approx(-5.0));
  CHECK(d.x.size() == 1001);
  CHECK_THAT(r.file("g2.svg").content, ContainsSubstring("<svg"));

  SECTION("an uncoupled second emitter leaves a single-emitter antibunching dip") {
    c.beta2 = 0.0;
    c.jitter_fwhm_ns = 0.0;
    const auto cols = parse_csv(cmd_g2(c, 0).file("g2.csv").content);
    const auto& tau = column(cols, "tau_ns");
    const auto zero = static_cast<std::size_t>(std::min_element(tau.begin(), tau.end(), [](double x, double y) {
                                                 return std::abs(x) < std::abs(y);
                                               }) - tau.begin());
    CHECK(column(cols, "g2")[zero] < 0.05);
  }

  SECTION("a pulsed config is rejected") {
    c.mode = "pulsed";
    CHECK_THROWS_AS(cmd_g2(c), ConfigError);
  }

  SECTION("a sweep gives a matrix with one column per value") {
    c.tau_start_ns = -0.5;
    c.tau_stop_ns = 0.5;
    c.tau_step_ns = 0.05;
    c.sweep = {"detuning_split", 0.0, 4.0, 3};
    const CommandResult s = cmd_g2(c, 0);
    const auto cols = parse_csv(s.file("g2_sweep.csv").content);
    REQUIRE(cols.size() == 4);
    CHECK(cols[1].name == "detuning_split=0");
    CHECK(cols[3].name == "detuning_split=4");
    CHECK(cols[0].values.size() == 21);
    const auto zero = parse_csv(s.file("g2_zero.csv").content);
    CHECK(zero[1].values[0] > zero[1].values[2]);
    CHECK_THAT(s.file("g2_sweep.svg").content, ContainsSubstring("<svg"));
  }
}

TEST_CASE("lifetime outputs", "[cli][lifetime]") {
  ExperimentConfig c = bundled("lifetime_in_phase.ini");
  c.time_stop_ns = 1.0;
  c.bloch = true;
  const CommandResult r = cmd_lifetime(c, 0);
  const auto cols = parse_csv(r.file("lifetime.csv").content);
  REQUIRE(cols.size() == 6);
  const auto& p1 = column(cols, "p1");
  const auto& p2 = column(cols, "p2");
  CHECK(p1.front() == 0.0);
  CHECK(*std::max_element(p1.begin(), p1.end()) > 0.1);
  const auto& pp = column(cols, "p_plus");
  const auto& pm = column(cols, "p_minus");
  // p1 + p2 counts the doubly excited state twice; p_plus + p_minus does not count it.
  for (std::size_t i = 0; i < pp.size(); ++i) CHECK(pp[i] + pm[i] <= p1[i] + p2[i] + 1e-12);

  const auto bloch = parse_csv(r.file("bloch.csv").content);
  REQUIRE(bloch.size() == 5);
  CHECK(std::isnan(bloch[1].values.front()));  // nothing excited before the pulse
  const double x = bloch[1].values.back(), y = bloch[2].values.back(), z = bloch[3].values.back();
  CHECK(x * x + y * y + z * z <= 1.0 + 1e-9);

  c.mode = "cw";
  CHECK_THROWS_AS(cmd_lifetime(c), ConfigError);
  c.mode = "pulsed";
  c.time_stop_ns = 0.05;
  CHECK_THROWS_AS(cmd_lifetime(c), ConfigError);

  c.time_stop_ns = 0.6;
  c.bloch = false;
  c.sweep = {"detuning_split", -2.0, 2.0, 5};
  const auto m = parse_csv(cmd_lifetime(c, 0).file("lifetime_sweep.csv").content);
  REQUIRE(m.size() == 6);
  // A symmetric split is mirror-symmetric for a symmetric drive.
  ExperimentConfig sym = c;
  sym.gamma2_ghz = sym.gamma1_ghz;
  const auto ms = parse_csv(cmd_lifetime(sym, 0).file("lifetime_sweep.csv").content);
  for (std::size_t i = 0; i < ms[1].values.size(); ++i)
    CHECK(ms[1].values[i] == Catch::Approx(ms[5].values[i]).epsilon(1e-6).margin(1e-9));
}

TEST_CASE("steady-state map", "[cli][steadystate]") {
  ExperimentConfig c = bundled("steadystate_map.ini");
  c.sweep.steps = 5;
  c.sweep2.steps = 7;

  SECTION("zero drive gives an all-zero matrix") {
    c.omega1_ghz = 0.0;
    const auto cols = parse_csv(cmd_steadystate_map(c, 0).file("steadystate_map.csv").content);
    REQUIRE(cols.size() == 6);
    for (std::size_t j = 1; j < cols.size(); ++j)
      for (double v : cols[j].values) CHECK(std::abs(v) < 1e-12);
  }

  SECTION("a single weakly driven emitter traces a Lorentzian of width Gamma") {
    c.beta2 = 0.0;
    c.omega1_ghz = 0.005;
    c.sweep = {"detuning_split", 50.0, 50.0, 1};
    c.sweep2 = {"laser_detuning", -2.0, 2.0, 401};
    const auto cols = parse_csv(cmd_steadystate_map(c, 0).file("steadystate_map.csv").content);
    const auto& laser = cols[0].values;
    const auto& y = cols[1].values;
    const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    CHECK(laser[peak] == Catch::Approx(0.0).margin(1e-12));
    auto crossing = [&](int dir) {
      std::size_t i = peak;
      while (y[i] > 0.5 * y[peak]) i += dir;
      const std::size_t j = i - dir;
      return laser[i] + (0.5 * y[peak] - y[i]) * (laser[j] - laser[i]) / (y[j] - y[i]);
    };
    const double fwhm = crossing(1) - crossing(-1);
    CHECK(fwhm == Catch::Approx(c.gamma1_ghz).epsilon(0.02));
  }

  SECTION("axes other than split by laser are rejected") {
    c.sweep2.axis = "beta2";
    CHECK_THROWS_AS(cmd_steadystate_map(c), ConfigError);
  }
}

TEST_CASE("waveplate map outputs and contour replay", "[cli][waveplate]") {
  const ExperimentConfig c = bundled("waveplate.ini");
  const CommandResult r = cmd_waveplate_map(c, 0);
  for (const char* name : {"a1sq.csv", "a2sq.csv", "relative.csv", "phase.csv"}) {
    const auto cols = parse_csv(r.file(name).content);
    CHECK(cols.size() == 92);
    CHECK(cols[0].values.size() == 91);
  }
  const auto flat = parse_csv(r.file("waveplate_map.csv").content);
  const auto& a1 = column(flat, "A1sq");
  const auto& a2 = column(flat, "A2sq");
  for (std::size_t i = 0; i < a1.size(); ++i) CHECK(a1[i] + a2[i] == Catch::Approx(1.0).margin(1e-12));

  // Replaying targets through the emitted contour reproduces the emitted angles exactly.
  const EqualAmplitudeContour contour = contour_from_csv(r.file("contour.csv").content);
  const auto targets = parse_csv(r.file("phase_targets.csv").content);
  const std::vector<double> q = uniform_grid(c.qwp_start_deg, c.qwp_stop_deg, c.qwp_step_deg);
  const std::vector<double> h = uniform_grid(c.hwp_start_deg, c.hwp_stop_deg, c.hwp_step_deg);
  const WaveplateMap map = build_waveplate_map(q, h);
  REQUIRE(column(targets, "target_rad").size() == 32);
  for (std::size_t k = 0; k < 32; ++k) {
    const double target = column(targets, "target_rad")[k];
    const WaveplateSetting s = setting_for_phase(map, contour, target);
    CHECK(s.qwp_deg == column(targets, "qwp_deg")[k]);
    CHECK(s.hwp_deg == column(targets, "hwp_deg")[k]);
    CHECK(std::abs(wrap_phase_symmetric(column(targets, "phase_rad")[k] - target)) < 1e-3);
  }
  CHECK_THROWS_AS(contour_from_csv("a,b\n1,2\n"), std::invalid_argument);
}

TEST_CASE("rabi outputs", "[cli][rabi]") {
  ExperimentConfig c = bundled("rabi.ini");

  SECTION("horizontal input drives both emitters at the same rate") {
    const CommandResult r = cmd_rabi(c, 0);
    const auto cols = parse_csv(r.file("rabi.csv").content);
    CHECK(column(cols, "I1").front() == 0.0);
    std::array<double, 2> p_pi{};
    for (int m = 0; m < 2; ++m) {
      const auto& y = column(cols, m == 0 ? "I1" : "I2");
      const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
      const FitResult f = fit(FitModel::rabi(std::numbers::pi / (2.0 * std::sqrt(cols[0].values[peak])), y[peak], 0.0),
                              {cols[0].values, y, {}});
      p_pi[m] = rabi_pi_power(f.value("eta_exc"));
    }
    CHECK(p_pi[0] / p_pi[1] == Catch::Approx(1.0).epsilon(0.02));
    CHECK_THAT(r.file("rabi_fit.txt").content, ContainsSubstring("P_pi"));
  }

  SECTION("circular light matched to emitter 1 leaves emitter 2 undriven") {
    for (double qwp : {45.0, -45.0}) {
      c.qwp_deg = qwp;
      if (c.drive().emitters[1].amplitude < 1e-9) break;
    }
    REQUIRE(c.drive().emitters[1].amplitude < 1e-9);
    // Far detuned, emitter 2 is reached neither by the laser nor by the guided field.
    c.detuning2_ghz = -400.0;
    const auto cols = parse_csv(cmd_rabi(c, 0).file("rabi.csv").content);
    const double peak1 = *std::max_element(column(cols, "I1").begin(), column(cols, "I1").end());
    CHECK(peak1 > 0.5 * c.system().emitters[0].waveguide_rate());
    for (double v : column(cols, "I2")) CHECK(std::abs(v) < 1e-5 * peak1);

    // Degenerate, the only emission from emitter 2 is what the guide hands over.
    c.detuning2_ghz = 0.0;
    const auto coupled = parse_csv(cmd_rabi(c, 0).file("rabi.csv").content);
    const auto& i1 = column(coupled, "I1");
    const auto& i2 = column(coupled, "I2");
    CHECK(*std::max_element(i2.begin(), i2.end()) < 1e-2 * *std::max_element(i1.begin(), i1.end()));
  }

  SECTION("the pi-pulse power inverts a lone emitter") {
    c.route = "direct";
    c.weight2 = 0.0;
    c.beta2 = 0.0;
    // Decay over the pulse tail must stay below 1e-3.
    c.pulse_fwhm_ns = 2e-5;
    c.pulse_center_ns = 0.001;
    const double p = rabi_pi_power(c.eta_exc);
    c.sweep = {"power", p, p, 1};
    c.fit_rabi = false;
    const auto cols = parse_csv(cmd_rabi(c, 0).file("rabi.csv").content);
    const double pe = column(cols, "I1")[0] / c.system().emitters[0].waveguide_rate();
    CHECK(pe > 0.999);
  }

  SECTION("power sweeps are required") {
    c.sweep.axis = "beta2";
    CHECK_THROWS_AS(cmd_rabi(c), ConfigError);
  }
}

TEST_CASE("fit subcommand", "[cli][fit]") {
  const fs::path dir = scratch_dir("fit");
  const double sigma = 0.15;
  std::vector<double> x, y;
  for (double t = -3.0; t <= 3.0 + 1e-9; t += 0.01) x.push_back(t);
  const FitModel truth = FitModel::two_sided_exp(0.8, 0.4, 0.6, sigma);
  y = truth.evaluate(x, truth.initial_values());
  write_text_file((dir / "trace.csv").string(), format_csv({{"tau_ns", x}, {"g2", y}}));

  const std::string cfg = write_config("fit_cfg", "[fit]\ndata = " + (dir / "trace.csv").string() +
                                                  "\nmodel = two_sided_exp\nsigma_ns = 0.15\n[output]\ndirectory = " +
                                                  (dir / "out").string() + "\n");
  std::string out, fit_err;
  const int code = run({"fit", "--config", cfg}, &out, &fit_err);
  INFO(fit_err);
  REQUIRE(code == 0);
  const std::string report = read_text_file((dir / "out" / "fit_report.txt").string());
  CHECK_THAT(report, ContainsSubstring("Gamma_adip"));
  const auto at = out.find("Gamma_adip = ");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(out.substr(at + 13)) == Catch::Approx(0.6).epsilon(1e-6));
  CHECK(fs::exists(dir / "out" / "fit.svg"));

  write_text_file((dir / "bad.csv").string(), "tau_ns,g2\n0,1\n0.1,oops\n");
  const std::string bad = write_config("fit_bad", "[fit]\ndata = " + (dir / "bad.csv").string() + "\n[output]\ndirectory = " +
                                                      (dir / "out2").string() + "\n");
  std::string err;
  CHECK(run({"fit", "--config", bad}, nullptr, &err) == 2);
  CHECK_THAT(err, ContainsSubstring("line 3"));
}

TEST_CASE("exit codes and output formats", "[cli]") {
  const std::string waveplate = std::string(WGQED_CONFIG_DIR) + "/waveplate.ini";
  CHECK(run({}) == 2);
  CHECK(run({"g2"}) == 2);
  CHECK(run({"teleport", "--config", waveplate}) == 2);
  CHECK(run({"g2", "--config", "/nonexistent/run.ini"}) == 2);
  CHECK(run({"waveplate-map", "--config", waveplate, "--format", "png"}) == 2);
  CHECK(run({"--help"}) == 0);

  std::string err;
  const std::string unknown = write_config("unknown", "[system]\nbeta1 = 0.9\nbeat2 = 0.9\n");
  CHECK(run({"g2", "--config", unknown}, nullptr, &err) == 2);
  CHECK_THAT(err, ContainsSubstring("line 3"));

  // An undriven system has no emission to correlate.
  const fs::path silent_dir = scratch_dir("silent");
  const std::string silent = write_config("silent_cfg", "[drive]\nmode = cw\n[output]\ndirectory = " + silent_dir.string() + "\n");
  CHECK(run({"g2", "--config", silent}, nullptr, &err) == 3);

  const fs::path dir = scratch_dir("formats");
  REQUIRE(run({"waveplate-map", "--config", waveplate, "--out", dir.string(), "--format", "csv"}) == 0);
  CHECK(fs::exists(dir / "contour.csv"));
  CHECK_FALSE(fs::exists(dir / "phase.svg"));
  CHECK(fs::exists(dir / "manifest.json"));
}

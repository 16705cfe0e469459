#include "wgqed/cli.hpp"

#include "wgqed/analysis.hpp"
#include "wgqed/correlations.hpp"
#include "wgqed/dynamics.hpp"
#include "wgqed/instrument.hpp"
#include "wgqed/io.hpp"
#include "wgqed/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

namespace wgqed {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double v) { return csv_number(v); }

std::size_t nearest_index(std::span<const double> grid, double x) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (std::abs(grid[k] - x) < std::abs(grid[best] - x)) best = k;
  return best;
}

void require_mode(const ExperimentConfig& c, const char* mode, const char* command) {
  if (c.mode != mode)
    throw ConfigError(std::string("[drive] ") + command + " requires mode = " + mode + ", got '" + c.mode + "'");
}

void require_axis(const SweepSpec& s, const char* section, std::initializer_list<const char*> allowed,
                  const char* command) {
  std::string list;
  for (const char* a : allowed) {
    if (s.axis == a) return;
    list += (list.empty() ? "" : ", ") + std::string(a);
  }
  throw ConfigError(std::string("[") + section + "] " + command + " supports axis = " + list + ", got '" + s.axis + "'");
}

// Converts a sweep value from config units to model units.
double sweep_value_in_model_units(const std::string& axis, double v) {
  if (axis == "detuning_split" || axis == "laser_detuning") return angular_ghz(v);
  return v;
}

SweepAxis to_sweep_axis(const std::string& axis) {
  if (axis == "detuning_split") return SweepAxis::DetuningSplit;
  if (axis == "beta2") return SweepAxis::Beta2;
  return SweepAxis::DrivePhase;
}

std::string axis_label(const std::string& axis) {
  if (axis == "detuning_split") return "Delta12 (GHz)";
  if (axis == "laser_detuning") return "laser detuning (GHz)";
  if (axis == "beta2") return "beta2";
  if (axis == "drive_phase") return "theta (rad)";
  if (axis == "power") return "power (mW)";
  return axis;
}

}  // namespace

const Artifact& CommandResult::file(const std::string& name) const {
  for (const auto& f : files)
    if (f.name == name) return f;
  throw std::out_of_range("no output file named " + name);
}

CommandResult cmd_g2(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  require_mode(config, "cw", "g2");
  const SystemParams sys = config.system();
  const DriveConfig drive = config.drive();
  const InstrumentModel inst = config.instrument();
  const std::vector<double> taus = uniform_grid(config.tau_start_ns, config.tau_stop_ns, config.tau_step_ns);
  const std::size_t zero = nearest_index(taus, 0.0);
  CommandResult out;
  std::ostringstream summary;

  if (!config.sweep.active()) {
    const ObservedG2 o = observed_g2(sys, drive, taus, inst, threads);
    out.files.push_back({"g2.csv", format_csv({{"tau_ns", taus}, {"g2", o.observed}})});
    out.files.push_back({"g2_components.csv", format_csv({{"tau_ns", taus},
                                                          {"g2_ideal", o.ideal.g2},
                                                          {"g2_diffusion", o.averaged.g2},
                                                          {"g2_observed", o.observed}})});
    out.files.push_back({"g2.svg", svg_line_plot("g2(tau)", "tau (ns)", "g2",
                                                 {{"ideal", taus, o.ideal.g2},
                                                  {"spectral diffusion", taus, o.averaged.g2},
                                                  {"with jitter", taus, o.observed}})});
    summary << "g2(0) ideal = " << num(o.ideal.g2[zero]) << "\n"
            << "g2(0) with spectral diffusion = " << num(o.averaged.g2[zero]) << "\n"
            << "g2(0) observed = " << num(o.observed[zero]) << "\n";
    out.summary = summary.str();
    return out;
  }

  require_axis(config.sweep, "sweep", {"detuning_split", "beta2", "drive_phase"}, "g2");
  const std::vector<double> values = config.sweep.values();
  std::vector<std::vector<double>> traces(values.size());
  std::vector<std::string> errors(values.size());
  parallel_for(values.size(), threads, [&](std::size_t k) {
    try {
      SystemParams s = sys;
      DriveConfig d = drive;
      apply_sweep_value(to_sweep_axis(config.sweep.axis), sweep_value_in_model_units(config.sweep.axis, values[k]), s, d);
      traces[k] = observed_g2(s, d, taus, inst, 1).observed;
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });

  std::vector<double> matrix(taus.size() * values.size(), std::nan(""));
  std::vector<double> at_zero(values.size(), std::nan(""));
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!errors[k].empty()) {
      summary << "sweep point " << config.sweep.axis << " = " << num(values[k]) << " failed: " << errors[k] << "\n";
      continue;
    }
    for (std::size_t i = 0; i < taus.size(); ++i) matrix[i * values.size() + k] = traces[k][i];
    at_zero[k] = traces[k][zero];
  }
  out.files.push_back({"g2_sweep.csv", format_matrix_csv("tau_ns", taus, config.sweep.axis, values, matrix)});
  out.files.push_back({"g2_zero.csv", format_csv({{config.sweep.axis, values}, {"g2_zero", at_zero}})});
  out.files.push_back({"g2_sweep.svg", svg_heatmap("observed g2(tau)", axis_label(config.sweep.axis), "tau (ns)",
                                                   values, taus, matrix)});
  out.files.push_back({"g2_zero.svg", svg_line_plot("g2(0)", axis_label(config.sweep.axis), "g2(0)",
                                                    {{"observed", values, at_zero}})});
  for (std::size_t k = 0; k < values.size(); ++k)
    summary << "g2(0) at " << config.sweep.axis << " = " << num(values[k]) << ": " << num(at_zero[k]) << "\n";
  out.summary = summary.str();
  return out;
}

CommandResult cmd_lifetime(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  require_mode(config, "pulsed", "lifetime");
  const SystemParams sys = config.system();
  const DriveConfig drive = config.drive();
  const std::vector<double> times = uniform_grid(0.0, config.time_stop_ns, config.time_step_ns);
  if (times.back() < drive.pulse.support_end())
    throw ConfigError("[time] stop_ns must extend past the pulse (to at least " + num(drive.pulse.support_end()) + " ns)");
  CommandResult out;
  std::ostringstream summary;

  if (!config.sweep.active()) {
    const IntensityTrace t = lifetime_experiment(sys, drive, times);
    out.files.push_back({"lifetime.csv", format_csv({{"t_ns", times},
                                                     {"intensity", t.intensity},
                                                     {"p1", t.emitter_population[0]},
                                                     {"p2", t.emitter_population[1]},
                                                     {"p_plus", t.population_plus},
                                                     {"p_minus", t.population_minus}})});
    out.files.push_back({"lifetime.svg", svg_line_plot("waveguide intensity", "t (ns)", "intensity (1/ns)",
                                                       {{"intensity", times, t.intensity}})});
    const std::size_t peak = static_cast<std::size_t>(
        std::max_element(t.intensity.begin(), t.intensity.end()) - t.intensity.begin());
    const std::size_t end_of_pulse = nearest_index(times, drive.pulse.support_end());
    summary << "peak intensity = " << num(t.intensity[peak]) << " at t = " << num(times[peak]) << " ns\n"
            << "intensity at pulse end (t = " << num(times[end_of_pulse]) << " ns) = " << num(t.intensity[end_of_pulse]) << "\n";
    if (config.bloch) {
      const BlochTrajectory b = bloch_trajectory(sys, drive, basis_state(0), times);
      std::vector<double> x, y, z, w;
      for (const auto& s : b.samples) {
        const double nan = std::nan("");
        x.push_back(s.valid ? s.x : nan);
        y.push_back(s.valid ? s.y : nan);
        z.push_back(s.valid ? s.z : nan);
        w.push_back(s.weight);
      }
      out.files.push_back({"bloch.csv", format_csv({{"t_ns", times}, {"x", x}, {"y", y}, {"z", z}, {"w", w}})});
    }
    out.summary = summary.str();
    return out;
  }

  require_axis(config.sweep, "sweep", {"detuning_split"}, "lifetime");
  const std::vector<double> values = config.sweep.values();
  std::vector<std::vector<double>> traces(values.size());
  std::vector<std::string> errors(values.size());
  parallel_for(values.size(), threads, [&](std::size_t k) {
    try {
      const double centre = 0.5 * (sys.emitters[0].detuning + sys.emitters[1].detuning);
      const SystemParams s = with_detuning_split(sys, angular_ghz(values[k]), LaserReference::Symmetric, centre);
      traces[k] = lifetime_experiment(s, drive, times).intensity;
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  std::vector<double> matrix(times.size() * values.size(), std::nan(""));
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!errors[k].empty()) {
      summary << "sweep point Delta12 = " << num(values[k]) << " GHz failed: " << errors[k] << "\n";
      continue;
    }
    for (std::size_t i = 0; i < times.size(); ++i) matrix[i * values.size() + k] = traces[k][i];
  }
  out.files.push_back({"lifetime_sweep.csv", format_matrix_csv("t_ns", times, "detuning_split", values, matrix)});
  out.files.push_back({"lifetime_sweep.svg", svg_heatmap("waveguide intensity", axis_label("detuning_split"),
                                                         "t (ns)", values, times, matrix)});
  out.summary = summary.str();
  return out;
}

CommandResult cmd_steadystate_map(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  require_mode(config, "cw", "steadystate-map");
  require_axis(config.sweep, "sweep", {"detuning_split"}, "steadystate-map");
  require_axis(config.sweep2, "sweep2", {"laser_detuning"}, "steadystate-map");
  const SystemParams sys = config.system();
  const DriveConfig drive = config.drive();
  const std::vector<double> split = config.sweep.values();
  const std::vector<double> laser = config.sweep2.values();

  // Laser detuning is measured from emitter 1: Delta1 = -laser, Delta2 = Delta1 - split.
  std::vector<double> values(laser.size() * split.size(), std::nan(""));
  std::vector<std::string> errors(values.size());
  parallel_for(values.size(), threads, [&](std::size_t k) {
    try {
      SystemParams s = sys;
      s.emitters[0].detuning = -angular_ghz(laser[k / split.size()]);
      s.emitters[1].detuning = s.emitters[0].detuning - angular_ghz(split[k % split.size()]);
      values[k] = waveguide_intensity(steady_state(s, drive), s);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  CommandResult out;
  std::ostringstream summary;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!errors[k].empty())
      summary << "cell (laser = " << num(laser[k / split.size()]) << ", split = " << num(split[k % split.size()])
              << ") failed: " << errors[k] << "\n";
  out.files.push_back({"steadystate_map.csv", format_matrix_csv("laser_detuning_ghz", laser, "detuning_split", split, values)});
  out.files.push_back({"steadystate_map.svg", svg_heatmap("steady-state waveguide intensity", axis_label("detuning_split"),
                                                          axis_label("laser_detuning"), split, laser, values)});
  const std::size_t row = nearest_index(laser, 0.0);
  summary << "intensity on the emitter 1 resonance (laser = " << num(laser[row]) << " GHz):\n";
  for (std::size_t j = 0; j < split.size(); ++j)
    summary << "  Delta12 = " << num(split[j]) << " GHz: " << num(values[row * split.size() + j]) << "\n";
  out.summary = summary.str();
  return out;
}

CommandResult cmd_waveplate_map(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  const std::vector<double> q = uniform_grid(config.qwp_start_deg, config.qwp_stop_deg, config.qwp_step_deg);
  const std::vector<double> h = uniform_grid(config.hwp_start_deg, config.hwp_stop_deg, config.hwp_step_deg);
  const JonesVector in = config.input == "V" ? jones_vertical() : jones_horizontal();
  const WaveplateMap map = build_waveplate_map(q, h, in, DipoleConfig::circular(),
                                               {config.qwp_offset_deg, config.hwp_offset_deg}, threads);
  CommandResult out;
  std::vector<double> qc, hc;
  for (double a : q)
    for (double b : h) {
      qc.push_back(a);
      hc.push_back(b);
    }
  out.files.push_back({"waveplate_map.csv", format_csv({{"qwp_deg", qc},
                                                        {"hwp_deg", hc},
                                                        {"A1sq", map.a1_sq},
                                                        {"A2sq", map.a2_sq},
                                                        {"rel_A1", map.relative},
                                                        {"phase_rad", map.phase}})});
  const std::pair<const char*, const std::vector<double>*> layers[] = {
      {"a1sq", &map.a1_sq}, {"a2sq", &map.a2_sq}, {"relative", &map.relative}, {"phase", &map.phase}};
  for (const auto& [name, data] : layers) {
    out.files.push_back({std::string(name) + ".csv", format_matrix_csv("qwp_deg", q, "hwp_deg", h, *data)});
    out.files.push_back({std::string(name) + ".svg", svg_heatmap(name, "HWP angle (deg)", "QWP angle (deg)", h, q, *data)});
  }

  const EqualAmplitudeContour contour = equal_amplitude_contour(map);
  std::vector<double> cq, ch, cp;
  for (const auto& p : contour.points) {
    cq.push_back(p.qwp_deg);
    ch.push_back(p.hwp_deg);
    cp.push_back(p.phase);
  }
  out.files.push_back({"contour.csv", format_csv({{"qwp_deg", cq}, {"hwp_deg", ch}, {"phase_rad", cp}})});

  std::vector<double> targets, tq, th, tp, ta1, ta2;
  int unreachable = 0;
  for (int k = 0; k < config.phase_targets; ++k) {
    const double target = -std::numbers::pi + kTwoPi * (k + 1) / config.phase_targets;
    targets.push_back(target);
    try {
      const WaveplateSetting s = setting_for_phase(map, contour, target);
      const PolarizationDrive d = map.evaluate(s.qwp_deg, s.hwp_deg);
      tq.push_back(s.qwp_deg);
      th.push_back(s.hwp_deg);
      tp.push_back(d.relative_phase());
      ta1.push_back(d.amplitude[0] * d.amplitude[0]);
      ta2.push_back(d.amplitude[1] * d.amplitude[1]);
    } catch (const std::out_of_range&) {
      ++unreachable;
      for (auto* v : {&tq, &th, &tp, &ta1, &ta2}) v->push_back(std::nan(""));
    }
  }
  out.files.push_back({"phase_targets.csv", format_csv({{"target_rad", targets},
                                                        {"qwp_deg", tq},
                                                        {"hwp_deg", th},
                                                        {"phase_rad", tp},
                                                        {"A1sq", ta1},
                                                        {"A2sq", ta2}})});
  std::ostringstream summary;
  summary << "contour points = " << contour.points.size() << ", phase range = [" << num(contour.phase_min) << ", "
          << num(contour.phase_max) << "] rad\n"
          << "phase targets reached = " << config.phase_targets - unreachable << " of " << config.phase_targets << "\n";
  out.summary = summary.str();
  return out;
}

CommandResult cmd_rabi(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  require_mode(config, "pulsed", "rabi");
  require_axis(config.sweep, "sweep", {"power"}, "rabi");
  const SystemParams sys = config.system();
  const DriveConfig base = config.drive();
  const std::vector<double> power = config.sweep.values();
  for (double p : power)
    if (p < 0.0) throw ConfigError("[sweep] power values must be >= 0");

  // Emitter m receives pulse area 2 eta sqrt(P) times its drive weight.
  std::array<std::vector<double>, 2> intensity{std::vector<double>(power.size()), std::vector<double>(power.size())};
  std::vector<std::string> errors(power.size());
  parallel_for(power.size(), threads, [&](std::size_t k) {
    try {
      if (power[k] == 0.0) return;
      DriveConfig d = base;
      d.pulse.area = 2.0 * config.eta_exc * std::sqrt(power[k]);
      const std::array<double, 2> grid{0.0, d.pulse.support_end()};
      const auto states = propagate(sys, d, basis_state(0), grid);
      for (int m = 0; m < 2; ++m)
        intensity[m][k] = config.collection_efficiency * sys.emitters[m].waveguide_rate() *
                          excited_population(states.back(), m);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < power.size(); ++k)
    if (!errors[k].empty()) throw NumericalError("power " + num(power[k]) + " mW: " + errors[k]);

  CommandResult out;
  std::ostringstream summary;
  out.files.push_back({"rabi.csv", format_csv({{"power_mw", power}, {"I1", intensity[0]}, {"I2", intensity[1]}})});
  std::vector<PlotSeries> series{{"I1", power, intensity[0]}, {"I2", power, intensity[1]}};

  if (config.fit_rabi) {
    std::string report;
    for (int m = 0; m < 2; ++m) {
      const auto& y = intensity[m];
      const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
      const std::string label = "emitter " + std::to_string(m + 1);
      if (!(y[peak] > 0.0) || power[peak] <= 0.0) {
        report += label + ": not fitted (no emission)\n";
        summary << label << ": no emission\n";
        continue;
      }
      try {
        const FitModel model = FitModel::rabi(std::numbers::pi / (2.0 * std::sqrt(power[peak])), y[peak], 0.0);
        const FitResult r = fit(model, {power, y, {}});
        report += label + "\n" + format_fit_report(model, r) + "\n";
        summary << label << ": P_pi = " << num(rabi_pi_power(r.value("eta_exc"))) << " mW\n";
        std::vector<double> curve;
        for (double p : power) curve.push_back(model_rabi(p, r.values[0], r.values[1], r.values[2]));
        series.push_back({"fit " + std::to_string(m + 1), power, curve});
      } catch (const NumericalError& e) {
        report += label + ": not fitted (" + e.what() + ")\n";
        summary << label << ": fit failed: " << e.what() << "\n";
      }
    }
    out.files.push_back({"rabi_fit.txt", report});
  }
  out.files.push_back({"rabi.svg", svg_line_plot("Rabi oscillations", "power (mW)", "intensity (1/ns)", series)});
  out.summary = summary.str();
  return out;
}

CommandResult cmd_fit(const ExperimentConfig& config, unsigned /*threads*/) {
  config.validate();
  if (config.fit_data.empty()) throw ConfigError("[fit] data must name a CSV file");
  FitData data;
  try {
    data = read_fit_csv_file(config.fit_data);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(config.fit_data + ": " + e.what());
  }
  const double sigma = config.fit_sigma_ns;
  FitModel dip = FitModel::broadened_dip(config.fit_amplitude, config.fit_gamma_minus_ghz, config.fit_gamma_d_ghz,
                                         config.fit_omega_ghz, sigma);
  dip.params[3].fixed = !config.fit_omega_free;
  const FitModel adip = FitModel::two_sided_exp(config.fit_baseline, config.fit_height, config.fit_gamma_adip_ghz, sigma);
  const FitModel rabi = FitModel::rabi(config.fit_eta, config.fit_rabi_amplitude, config.fit_offset);

  CommandResult out;
  std::ostringstream summary;
  std::string report;
  std::vector<PlotSeries> series{{"data", data.x, data.y}};
  auto add_curve = [&](const std::string& name, const FitModel& m, const FitResult& r, const FitData& d) {
    series.push_back({name, d.x, m.evaluate(d.x, r.values)});
  };
  auto subset = [&](bool outer) {
    FitData d;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const double a = std::abs(data.x[i]);
      if (outer ? a >= config.fit_split_ns : a <= config.fit_split_ns) {
        d.x.push_back(data.x[i]);
        d.y.push_back(data.y[i]);
        if (!data.error.empty()) d.error.push_back(data.error[i]);
      }
    }
    return d;
  };

  if (config.fit_model == "windows") {
    const WindowedFit w = fit_windows(data, dip, adip, config.fit_split_ns);
    report = "dip window |tau| >= " + num(config.fit_split_ns) + " ns\n" + format_fit_report(dip, w.dip) +
             "\nantidip window |tau| <= " + num(config.fit_split_ns) + " ns\n" + format_fit_report(adip, w.antidip);
    add_curve("dip fit", dip, w.dip, subset(true));
    add_curve("antidip fit", adip, w.antidip, subset(false));
    summary << "Gamma_dip = " << num(w.dip.value("Gamma_minus")) << " +- " << num(w.dip.uncertainty("Gamma_minus")) << " GHz\n"
            << "Gamma_adip = " << num(w.antidip.value("Gamma_adip")) << " +- " << num(w.antidip.uncertainty("Gamma_adip")) << " GHz\n";
  } else {
    const FitModel& m = config.fit_model == "broadened_dip" ? dip : config.fit_model == "two_sided_exp" ? adip : rabi;
    const FitResult r = fit(m, data);
    report = format_fit_report(m, r);
    add_curve("fit", m, r, data);
    for (std::size_t k = 0; k < r.names.size(); ++k) summary << r.names[k] << " = " << num(r.values[k]) << "\n";
  }
  out.files.push_back({"fit_report.txt", report});
  const bool power_axis = config.fit_model == "rabi";
  out.files.push_back({"fit.svg", svg_line_plot("fit", power_axis ? "power (mW)" : "tau (ns)", "value", series)});
  out.summary = summary.str();
  return out;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& config, unsigned threads) {
  if (name == "g2") return cmd_g2(config, threads);
  if (name == "lifetime") return cmd_lifetime(config, threads);
  if (name == "steadystate-map") return cmd_steadystate_map(config, threads);
  if (name == "waveplate-map") return cmd_waveplate_map(config, threads);
  if (name == "rabi") return cmd_rabi(config, threads);
  if (name == "fit") return cmd_fit(config, threads);
  throw ConfigError("unknown subcommand " + name);
}

EqualAmplitudeContour contour_from_csv(const std::string& text) {
  const auto cols = parse_csv(text);
  if (cols.size() != 3 || cols[0].name != "qwp_deg" || cols[1].name != "hwp_deg" || cols[2].name != "phase_rad")
    throw std::invalid_argument("contour CSV must have columns qwp_deg,hwp_deg,phase_rad");
  EqualAmplitudeContour c;
  for (std::size_t i = 0; i < cols[0].values.size(); ++i)
    c.points.push_back({cols[0].values[i], cols[1].values[i], cols[2].values[i]});
  if (c.points.empty()) throw std::invalid_argument("contour CSV has no rows");
  c.phase_min = c.phase_max = c.points.front().phase;
  for (const auto& p : c.points) {
    c.phase_min = std::min(c.phase_min, p.phase);
    c.phase_max = std::max(c.phase_max, p.phase);
  }
  return c;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two waveguide-coupled emitters: correlations, dynamics, polarization control and fits"};
  app.require_subcommand(1);
  std::string config_path, out_dir, format;
  unsigned threads = 0;
  long long seed = 0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"g2", "intensity correlation g2(tau) with instrument effects, optionally swept"},
      {"lifetime", "pulsed emission dynamics, optionally swept over Delta12"},
      {"steadystate-map", "steady-state intensity over (Delta12, laser detuning)"},
      {"waveplate-map", "waveplate maps and the equal-amplitude contour"},
      {"rabi", "emission versus pulse power with P_pi fits"},
      {"fit", "fit correlation or Rabi data from CSV"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides [output] directory)");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores");
    sub->add_option("--seed", seed, "reserved; recorded in the manifest");
    sub->add_option("--format", format, "csv, svg or both")->check(CLI::IsMember({"csv", "svg", "both"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ExperimentConfig config = load_config(config_path);
    if (!out_dir.empty()) config.directory = out_dir;
    if (!format.empty()) config.format = format;

    const auto start = std::chrono::steady_clock::now();
    const CommandResult result = run_command(command, config, threads);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::ordered_json manifest;
    manifest["artifact"] = "wgqed";
    manifest["version"] = kVersion;
    manifest["command"] = command;
    manifest["config"] = to_ini(config);
    manifest["seed"] = seed;
    manifest["threads"] = resolve_threads(threads);
    manifest["duration_s"] = seconds;
    manifest["files"] = nlohmann::ordered_json::array();
    for (const auto& f : result.files) {
      const std::string ext = std::filesystem::path(f.name).extension().string();
      if ((ext == ".csv" && config.format == "svg") || (ext == ".svg" && config.format == "csv")) continue;
      write_text_file((std::filesystem::path(config.directory) / f.name).string(), f.content);
      manifest["files"].push_back({{"name", f.name}, {"bytes", f.content.size()}, {"sha256", sha256_hex(f.content)}});
    }
    write_text_file((std::filesystem::path(config.directory) / "manifest.json").string(), manifest.dump(2) + "\n");
    out << result.summary << "wrote " << manifest["files"].size() << " files and manifest.json to "
        << config.directory << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace wgqed

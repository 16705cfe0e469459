#include "wgqed/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace wgqed {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a finite number, got '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Key {
  std::string section;
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

Key key(std::string section, std::string name, double ExperimentConfig::*m) {
  return {std::move(section), std::move(name), [m](const ExperimentConfig& c) { return format_double(c.*m); },
          [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_double(v); }};
}
Key key(std::string section, std::string name, int ExperimentConfig::*m) {
  return {std::move(section), std::move(name), [m](const ExperimentConfig& c) { return std::to_string(c.*m); },
          [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_int(v); }};
}
Key key(std::string section, std::string name, bool ExperimentConfig::*m) {
  return {std::move(section), std::move(name), [m](const ExperimentConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_bool(v); }};
}
Key key(std::string section, std::string name, std::string ExperimentConfig::*m) {
  return {std::move(section), std::move(name), [m](const ExperimentConfig& c) { return c.*m; },
          [m](ExperimentConfig& c, const std::string& v) { c.*m = v; }};
}

void add_sweep(std::vector<Key>& keys, const std::string& section, SweepSpec ExperimentConfig::*s) {
  keys.push_back({section, "axis", [s](const ExperimentConfig& c) { return (c.*s).axis; },
                  [s](ExperimentConfig& c, const std::string& v) { (c.*s).axis = v; }});
  keys.push_back({section, "start", [s](const ExperimentConfig& c) { return format_double((c.*s).start); },
                  [s](ExperimentConfig& c, const std::string& v) { (c.*s).start = parse_double(v); }});
  keys.push_back({section, "stop", [s](const ExperimentConfig& c) { return format_double((c.*s).stop); },
                  [s](ExperimentConfig& c, const std::string& v) { (c.*s).stop = parse_double(v); }});
  keys.push_back({section, "steps", [s](const ExperimentConfig& c) { return std::to_string((c.*s).steps); },
                  [s](ExperimentConfig& c, const std::string& v) { (c.*s).steps = parse_int(v); }});
}

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = [] {
    using C = ExperimentConfig;
    std::vector<Key> k{
        key("system", "gamma1_ghz", &C::gamma1_ghz),
        key("system", "gamma2_ghz", &C::gamma2_ghz),
        key("system", "beta1", &C::beta1),
        key("system", "beta2", &C::beta2),
        key("system", "dephasing1_ghz", &C::dephasing1_ghz),
        key("system", "dephasing2_ghz", &C::dephasing2_ghz),
        key("system", "detuning1_ghz", &C::detuning1_ghz),
        key("system", "detuning2_ghz", &C::detuning2_ghz),
        key("system", "coupling_phase", &C::coupling_phase),
        key("drive", "mode", &C::mode),
        key("drive", "route", &C::route),
        key("drive", "omega1_ghz", &C::omega1_ghz),
        key("drive", "omega2_ghz", &C::omega2_ghz),
        key("drive", "weight1", &C::weight1),
        key("drive", "weight2", &C::weight2),
        key("drive", "theta1", &C::theta1),
        key("drive", "theta2", &C::theta2),
        key("drive", "pulse_center_ns", &C::pulse_center_ns),
        key("drive", "pulse_fwhm_ns", &C::pulse_fwhm_ns),
        key("drive", "pulse_area", &C::pulse_area),
        key("drive", "input", &C::input),
        key("drive", "qwp_deg", &C::qwp_deg),
        key("drive", "hwp_deg", &C::hwp_deg),
        key("drive", "qwp_offset_deg", &C::qwp_offset_deg),
        key("drive", "hwp_offset_deg", &C::hwp_offset_deg),
        key("drive", "polarization_scale", &C::polarization_scale),
        key("instrument", "jitter_fwhm_ns", &C::jitter_fwhm_ns),
        key("instrument", "diffusion1_ghz", &C::diffusion1_ghz),
        key("instrument", "diffusion2_ghz", &C::diffusion2_ghz),
        key("instrument", "quadrature_order", &C::quadrature_order),
        key("instrument", "diffusion_correlation", &C::diffusion_correlation),
        key("tau", "start_ns", &C::tau_start_ns),
        key("tau", "stop_ns", &C::tau_stop_ns),
        key("tau", "step_ns", &C::tau_step_ns),
        key("time", "stop_ns", &C::time_stop_ns),
        key("time", "step_ns", &C::time_step_ns),
        key("time", "bloch", &C::bloch),
    };
    add_sweep(k, "sweep", &C::sweep);
    add_sweep(k, "sweep2", &C::sweep2);
    for (Key x : {
             key("waveplate", "qwp_start_deg", &C::qwp_start_deg),
             key("waveplate", "qwp_stop_deg", &C::qwp_stop_deg),
             key("waveplate", "qwp_step_deg", &C::qwp_step_deg),
             key("waveplate", "hwp_start_deg", &C::hwp_start_deg),
             key("waveplate", "hwp_stop_deg", &C::hwp_stop_deg),
             key("waveplate", "hwp_step_deg", &C::hwp_step_deg),
             key("waveplate", "phase_targets", &C::phase_targets),
             key("rabi", "eta_exc", &C::eta_exc),
             key("rabi", "collection_efficiency", &C::collection_efficiency),
             key("rabi", "fit", &C::fit_rabi),
             key("fit", "data", &C::fit_data),
             key("fit", "model", &C::fit_model),
             key("fit", "sigma_ns", &C::fit_sigma_ns),
             key("fit", "split_ns", &C::fit_split_ns),
             key("fit", "amplitude", &C::fit_amplitude),
             key("fit", "gamma_minus_ghz", &C::fit_gamma_minus_ghz),
             key("fit", "gamma_d_ghz", &C::fit_gamma_d_ghz),
             key("fit", "omega_ghz", &C::fit_omega_ghz),
             key("fit", "omega_free", &C::fit_omega_free),
             key("fit", "baseline", &C::fit_baseline),
             key("fit", "height", &C::fit_height),
             key("fit", "gamma_adip_ghz", &C::fit_gamma_adip_ghz),
             key("fit", "eta_exc", &C::fit_eta),
             key("fit", "rabi_amplitude", &C::fit_rabi_amplitude),
             key("fit", "offset", &C::fit_offset),
             key("output", "directory", &C::directory),
             key("output", "format", &C::format),
         })
      k.push_back(std::move(x));
    return k;
  }();
  return keys;
}

void require_one_of(const std::string& section, const std::string& name, const std::string& value,
                    std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (value == a) return;
    list += (list.empty() ? "" : ", ") + std::string(a);
  }
  throw ConfigError("[" + section + "] " + name + " = '" + value + "' is not one of: " + list);
}

template <typename F>
void in_section(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("[" + section + "] " + e.what());
  }
}

}  // namespace

std::vector<double> SweepSpec::values() const {
  if (steps < 1) throw ConfigError("sweep steps must be >= 1");
  if (steps == 1) return {start};
  std::vector<double> v(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) v[static_cast<std::size_t>(k)] = start + (stop - start) * k / (steps - 1);
  v.back() = stop;
  return v;
}

SystemParams ExperimentConfig::system() const {
  SystemParams sys;
  sys.emitters[0] = {angular_ghz(gamma1_ghz), beta1, angular_ghz(dephasing1_ghz), angular_ghz(detuning1_ghz)};
  sys.emitters[1] = {angular_ghz(gamma2_ghz), beta2, angular_ghz(dephasing2_ghz), angular_ghz(detuning2_ghz)};
  sys.coupling_phase = coupling_phase;
  return sys;
}

DriveConfig ExperimentConfig::drive() const {
  GaussianPulse pulse;
  pulse.center = pulse_center_ns;
  pulse.fwhm = pulse_fwhm_ns;
  pulse.area = pulse_area;
  const bool cw = mode == "cw";

  DriveConfig d = cw ? DriveConfig::cw(angular_ghz(omega1_ghz), wrap_phase(theta1), angular_ghz(omega2_ghz), wrap_phase(theta2))
                     : DriveConfig::pulsed(pulse, weight1, wrap_phase(theta1), weight2, wrap_phase(theta2));
  if (route == "polarization") {
    const JonesVector in = input == "V" ? jones_vertical() : jones_horizontal();
    const JonesVector eps = waveplate_output(qwp_deg, hwp_deg, in, {qwp_offset_deg, hwp_offset_deg});
    const double scale = cw ? angular_ghz(polarization_scale) : polarization_scale;
    d = drive_from_polarization(eps, DipoleConfig::circular(), scale).apply(d);
  }
  return d;
}

InstrumentModel ExperimentConfig::instrument() const {
  InstrumentModel m;
  m.jitter_fwhm = jitter_fwhm_ns;
  m.diffusion_width = {angular_ghz(diffusion1_ghz), angular_ghz(diffusion2_ghz)};
  m.quadrature_order = quadrature_order;
  m.diffusion_correlation = diffusion_correlation;
  return m;
}

void ExperimentConfig::validate() const {
  require_one_of("drive", "mode", mode, {"cw", "pulsed"});
  require_one_of("drive", "route", route, {"direct", "polarization"});
  require_one_of("drive", "input", input, {"H", "V"});
  require_one_of("output", "format", format, {"csv", "svg", "both"});
  require_one_of("fit", "model", fit_model, {"broadened_dip", "two_sided_exp", "rabi", "windows"});
  for (const auto* s : {&sweep, &sweep2}) {
    const std::string section = s == &sweep ? "sweep" : "sweep2";
    require_one_of(section, "axis", s->axis,
                   {"none", "detuning_split", "beta2", "drive_phase", "laser_detuning", "power"});
    if (s->steps < 1) throw ConfigError("[" + section + "] steps must be >= 1");
  }
  in_section("system", [&] { system().validate(); });
  in_section("drive", [&] { drive().validate(); });
  in_section("instrument", [&] { instrument().validate(); });
  auto positive = [](const std::string& section, const std::string& name, double v) {
    if (!(v > 0.0)) throw ConfigError("[" + section + "] " + name + " must be > 0");
  };
  positive("tau", "step_ns", tau_step_ns);
  if (!(tau_stop_ns > tau_start_ns)) throw ConfigError("[tau] stop_ns must exceed start_ns");
  positive("time", "step_ns", time_step_ns);
  positive("time", "stop_ns", time_stop_ns);
  positive("waveplate", "qwp_step_deg", qwp_step_deg);
  positive("waveplate", "hwp_step_deg", hwp_step_deg);
  if (!(qwp_stop_deg >= qwp_start_deg) || !(hwp_stop_deg >= hwp_start_deg))
    throw ConfigError("[waveplate] grid stop must not precede start");
  if (phase_targets < 1) throw ConfigError("[waveplate] phase_targets must be >= 1");
  positive("rabi", "eta_exc", eta_exc);
  positive("rabi", "collection_efficiency", collection_efficiency);
  if (!(fit_sigma_ns >= 0.0)) throw ConfigError("[fit] sigma_ns must be >= 0");
  positive("fit", "split_ns", fit_split_ns);
  if (directory.empty()) throw ConfigError("[output] directory must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::map<std::string, const Key*>> index;
  for (const Key& k : schema()) index[k.section][k.name] = &k;

  ExperimentConfig cfg;
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& what) { throw ConfigError("line " + std::to_string(line_no) + ": " + what); };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!index.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of any section");
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index[section].find(name);
    if (it == index[section].end()) fail("unknown key '" + name + "' in section [" + section + "]");
    if (!seen.insert({section, name}).second) fail("duplicate key '" + name + "' in section [" + section + "]");
    try {
      it->second->set(cfg, value);
    } catch (const std::exception& e) {
      fail("[" + section + "] " + name + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string to_ini(const ExperimentConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const Key& k : schema()) {
    if (k.section != section) {
      if (!section.empty()) os << "\n";
      section = k.section;
      os << "[" << section << "]\n";
    }
    os << k.name << " = " << k.get(config) << "\n";
  }
  return os.str();
}

}  // namespace wgqed

#pragma once

// Experiment configuration: a sectioned key = value text format. Rates and
// detunings are entered as ordinary frequencies in GHz and converted to
// angular units on use.

#include "wgqed/instrument.hpp"
#include "wgqed/model.hpp"
#include "wgqed/polarization.hpp"

#include <stdexcept>
#include <string>

namespace wgqed {

/// Malformed or invalid configuration. Parse errors carry "line N:".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepSpec {
  std::string axis = "none";  ///< none | detuning_split | beta2 | drive_phase | laser_detuning | power
  double start = 0.0;
  double stop = 0.0;
  int steps = 1;

  bool active() const { return axis != "none"; }
  /// `steps` evenly spaced values including both ends.
  std::vector<double> values() const;
  bool operator==(const SweepSpec&) const = default;
};

struct ExperimentConfig {
  // [system]
  double gamma1_ghz = 0.76, gamma2_ghz = 0.76;
  double beta1 = 0.95, beta2 = 0.95;
  double dephasing1_ghz = 0.0, dephasing2_ghz = 0.0;
  double detuning1_ghz = 0.0, detuning2_ghz = 0.0;  ///< emitter minus laser
  double coupling_phase = 0.0;                      ///< rad

  // [drive]
  std::string mode = "cw";       ///< cw | pulsed
  std::string route = "direct";  ///< direct | polarization
  double omega1_ghz = 0.0, omega2_ghz = 0.0;  ///< CW Rabi amplitudes
  double weight1 = 1.0, weight2 = 1.0;        ///< pulsed per-emitter area weights
  double theta1 = 0.0, theta2 = 0.0;          ///< rad
  double pulse_center_ns = 0.2, pulse_fwhm_ns = 0.01, pulse_area = std::numbers::pi / 4.0;
  std::string input = "H";  ///< H | V, polarization route
  double qwp_deg = 0.0, hwp_deg = 0.0;
  double qwp_offset_deg = 0.0, hwp_offset_deg = 0.0;
  double polarization_scale = 1.0;  ///< GHz for CW, weight for pulsed

  // [instrument]
  double jitter_fwhm_ns = 0.0;
  double diffusion1_ghz = 0.0, diffusion2_ghz = 0.0;
  int quadrature_order = 9;
  double diffusion_correlation = 0.0;

  // [tau]
  double tau_start_ns = -5.0, tau_stop_ns = 5.0, tau_step_ns = 0.005;
  // [time]
  double time_stop_ns = 5.0, time_step_ns = 0.005;
  bool bloch = false;

  // [sweep]
  SweepSpec sweep{};
  SweepSpec sweep2{};

  // [waveplate]
  double qwp_start_deg = -45.0, qwp_stop_deg = 45.0, qwp_step_deg = 1.0;
  double hwp_start_deg = -45.0, hwp_stop_deg = 45.0, hwp_step_deg = 1.0;
  int phase_targets = 32;

  // [rabi]
  double eta_exc = 0.5;  ///< rad per sqrt(mW) per unit Jones amplitude
  double collection_efficiency = 1.0;
  bool fit_rabi = true;

  // [fit]
  std::string fit_data;
  std::string fit_model = "windows";  ///< broadened_dip | two_sided_exp | rabi | windows
  double fit_sigma_ns = 0.0;
  double fit_split_ns = 0.4;
  double fit_amplitude = 0.5, fit_gamma_minus_ghz = 0.3, fit_gamma_d_ghz = 0.01, fit_omega_ghz = 0.25;
  bool fit_omega_free = false;
  double fit_baseline = 1.0, fit_height = 0.1, fit_gamma_adip_ghz = 0.5;
  double fit_eta = 0.5, fit_rabi_amplitude = 1.0, fit_offset = 0.0;

  // [output]
  std::string directory = "out";
  std::string format = "both";  ///< csv | svg | both

  bool operator==(const ExperimentConfig&) const = default;

  SystemParams system() const;
  DriveConfig drive() const;
  InstrumentModel instrument() const;
  /// Throws ConfigError naming the section when a module invariant fails.
  void validate() const;
};

/// Parses config text. Unknown sections or keys, duplicates and malformed
/// values raise ConfigError with the line number.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Every key, in schema order, with round-trip precision.
std::string to_ini(const ExperimentConfig& config);

}  // namespace wgqed

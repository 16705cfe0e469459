#pragma once

#include "wgqed/model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wgqed {

struct CorrelationTrace {
  std::vector<double> taus;  ///< ns
  std::vector<double> g2;
  std::vector<double> G2;    ///< unnormalized coincidence rate
  double intensity = 0.0;    ///< steady-state <E^dagger E>
};

/// [-5, 5] ns at 5 ps.
std::vector<double> default_tau_grid();

/// Quantum-regression g2 of the waveguide output for a CW drive. Negative
/// delays reuse the value at |tau|; tau = 0 is evaluated without propagation.
CorrelationTrace g2_regression(const SystemParams& sys, const DriveConfig& drive,
                               std::span<const double> taus);

/// Regression result given an already computed steady state.
CorrelationTrace g2_regression(const SystemParams& sys, const DriveConfig& drive,
                               const DensityMatrix& rho_ss, std::span<const double> taus);

/// g2(0) alone: Tr[E^dag E E rho E^dag] / I^2.
double g2_zero(const SystemParams& sys, const DriveConfig& drive);

/// Leading-order weak-drive correlation g2(tau) = |c + c+ e^{-i l+ tau} + c- e^{-i l- tau}|^2
/// where l+- are the single-excitation eigenvalues (Im l = -Gamma/2); c = 1.
struct AnalyticG2 {
  CorrelationTrace trace;
  cplx c{1.0, 0.0};
  cplx c_plus{};
  cplx c_minus{};
  std::array<DecayMode, 2> modes{};  ///< fast (+) then slow (-)
  bool weak_drive_warning = false;   ///< some |Omega_m| exceeds Gamma_bar / 20
};

/// Throws NumericalError when the single-excitation block is singular (a
/// decoupled dark mode at zero detuning) or nothing is emitted.
AnalyticG2 g2_analytic(const SystemParams& sys, const DriveConfig& drive,
                       std::span<const double> taus);

/// Evaluates |c + c+ e^{-i l+ tau} + c- e^{-i l- tau}|^2 for the given coefficients.
double evaluate_g2_form(const AnalyticG2& form, double tau);

enum class SweepAxis {
  DetuningSplit,  ///< Delta12, laser pinned to emitter 1
  Beta2,          ///< beta of emitter 2
  DrivePhase,     ///< theta = theta1 - theta2
};

struct SweepFailure {
  std::size_t index = 0;
  double value = 0.0;
  std::string message;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::DetuningSplit;
  std::vector<double> values;
  std::vector<std::optional<CorrelationTrace>> traces;
  std::vector<SweepFailure> failures;
};

/// Applies one sweep value to copies of the templates.
void apply_sweep_value(SweepAxis axis, double value, SystemParams& sys, DriveConfig& drive);

/// One regression per value, evaluated on `threads` workers (0: hardware
/// concurrency). Failing points are recorded and the sweep continues.
SweepResult g2_sweep(const SystemParams& sys, const DriveConfig& drive, SweepAxis axis,
                     std::span<const double> values, std::span<const double> taus,
                     unsigned threads = 0);

}  // namespace wgqed

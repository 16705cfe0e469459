#pragma once

// Closed-form correlation and Rabi models and a bounded Levenberg-Marquardt
// fitter. Rates in the correlation models are ordinary frequencies (GHz);
// the 2 pi is inside the model.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wgqed {

/// 1 - A e^{-eta|tau|} [cos(mu tau) + (eta/mu) sin(mu|tau|)] with
/// mu = 2pi sqrt(Omega^2 + ((Gm - 2Gd)/4)^2), eta = 2pi (3 Gm + 2 Gd)/4.
/// At mu = 0 this is 1 - A e^{-eta|tau|}(1 + eta|tau|).
double model_broadened_dip(double tau, double amplitude, double gamma_minus, double gamma_d,
                           double omega);

/// baseline + height e^{-2pi Gadip |tau|}
double model_two_sided_exp(double tau, double baseline, double height, double gamma_adip);

/// offset + amplitude sin^2(eta sqrt(P))
double model_rabi(double power, double eta, double amplitude, double offset);

/// Power of the first maximum, (pi / (2 eta))^2.
double rabi_pi_power(double eta);

enum class ModelKind { BroadenedDip, TwoSidedExp, Rabi };

struct FitParameter {
  std::string name;
  std::string unit;
  double value = 0.0;  ///< initial guess
  double lower = -1e300;
  double upper = 1e300;
  bool fixed = false;
};

struct FitModel {
  ModelKind kind = ModelKind::TwoSidedExp;
  std::vector<FitParameter> params;
  /// Gaussian instrument response for delay-axis models; 0 disables it.
  double instrument_sigma = 0.0;
  double instrument_center = 0.0;

  /// A, Gamma_minus, Gamma_d, Omega (GHz); Omega fixed.
  static FitModel broadened_dip(double amplitude, double gamma_minus, double gamma_d, double omega,
                                double sigma = 0.0);
  static FitModel two_sided_exp(double baseline, double height, double gamma_adip, double sigma = 0.0);
  static FitModel rabi(double eta, double amplitude, double offset);

  void validate() const;
  std::vector<double> initial_values() const;
  std::size_t index_of(const std::string& name) const;
  /// Model values at `x` for full parameter vector `p`, including the
  /// instrument convolution when enabled.
  std::vector<double> evaluate(std::span<const double> x, std::span<const double> p) const;
};

struct FitData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> error;  ///< empty for unit weights
};

struct FitOptions {
  int max_iterations = 200;
  double relative_reduction = 1e-10;
  double gradient_tolerance = 1e-8;
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> uncertainties;  ///< 1 sigma, scaled by reduced chi-square; 0 if fixed
  double residual_norm = 0.0;         ///< sqrt of weighted sum of squares
  double reduced_chi2 = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;

  double value(const std::string& name) const;
  double uncertainty(const std::string& name) const;
};

/// Weighted bounded least squares starting from the model's parameter values.
/// Throws NumericalError naming the parameters when the Jacobian is singular.
FitResult fit(const FitModel& model, const FitData& data, const FitOptions& options = {});

/// Same model with parameter values replaced by the fit's, for refitting.
FitModel with_values(FitModel model, const FitResult& result);

/// Weighted residual norm of `model` at parameters `p`.
double residual_norm(const FitModel& model, const FitData& data, std::span<const double> p);

/// Dip model on |tau| >= split, antidip model on |tau| <= split.
struct WindowedFit {
  FitResult dip;
  FitResult antidip;
};
WindowedFit fit_windows(const FitData& trace, const FitModel& dip, const FitModel& antidip,
                        double split = 0.4, const FitOptions& options = {});

/// Reads "tau_ns,<name>[,error]" or "power_mw,<name>[,error]" CSV. Throws
/// std::invalid_argument with the offending line number.
FitData read_fit_csv(std::istream& in);
FitData read_fit_csv_file(const std::string& path);

/// Plain-text parameter table.
std::string format_fit_report(const FitModel& model, const FitResult& result);

}  // namespace wgqed

#pragma once

// Detector timing jitter and quasi-static spectral diffusion applied to ideal
// observables.

#include "wgqed/correlations.hpp"
#include "wgqed/model.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace wgqed {

/// Coincidence jitter sigma for two identical detectors of the given FWHM.
double jitter_sigma_from_fwhm(double fwhm);

struct InstrumentModel {
  double jitter_fwhm = 0.35;  ///< per detector, ns
  std::array<double, kNumEmitters> diffusion_width{};  ///< sigma_sd per emitter, rad/ns
  int quadrature_order = 9;
  /// Correlation coefficient between the two emitters' offsets.
  double diffusion_correlation = 0.0;

  double jitter_sigma() const { return jitter_sigma_from_fwhm(jitter_fwhm); }
  void validate() const;
};

/// Discrete Gaussian convolution on a uniform grid. The kernel is cut at
/// +-6 sigma and renormalized; values beyond the ends are held at the edge
/// samples. sigma = 0 returns the input. Throws std::invalid_argument when
/// the step exceeds sigma / 4.
std::vector<double> jitter_convolve(std::span<const double> taus, std::span<const double> values,
                                    double sigma);

/// Gauss-Hermite rule for the standard normal: sum_k w_k f(x_k) ~ E[f(Z)].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_hermite(int order);

/// Observable evaluated at detuning offsets (delta1, delta2), rad/ns. It must
/// return unnormalized quantities so averaging is linear.
using DiffusionObservable = std::function<std::vector<double>(double, double)>;

/// Tensor Gauss-Hermite average over the offsets. Emitters with zero width
/// contribute a single node. Throws NumericalError naming the node if the
/// observable is non-finite or throws there.
std::vector<double> spectral_diffusion_average(const DiffusionObservable& observable,
                                               const InstrumentModel& model, unsigned threads = 0);

/// g2 with <G2> and <I> averaged separately, then g2 = <G2> / <I>^2.
CorrelationTrace diffusion_averaged_g2(const SystemParams& sys, const DriveConfig& drive,
                                       std::span<const double> taus, const InstrumentModel& model,
                                       unsigned threads = 0);

struct ObservedG2 {
  CorrelationTrace ideal;     ///< no diffusion, no jitter
  CorrelationTrace averaged;  ///< spectral diffusion only
  std::vector<double> observed;  ///< averaged, then convolved with the jitter
  double jitter_sigma = 0.0;
};

/// Full pipeline. `taus` must be a uniform grid fine enough for the jitter.
ObservedG2 observed_g2(const SystemParams& sys, const DriveConfig& drive,
                       std::span<const double> taus, const InstrumentModel& model,
                       unsigned threads = 0);

struct CellFailure {
  std::size_t row = 0;
  std::size_t col = 0;
  std::string message;
};

/// Row-major map over (Delta1, Delta2) with NaN in failed cells.
struct DetuningMap {
  std::vector<double> delta1;
  std::vector<double> delta2;
  std::vector<double> values;  ///< index = i1 * delta2.size() + i2
  std::vector<CellFailure> failures;

  double at(std::size_t i1, std::size_t i2) const { return values[i1 * delta2.size() + i2]; }
};

/// g2(0) with the emitter detunings set to each grid pair.
DetuningMap g2_map_diffusion(const SystemParams& sys, const DriveConfig& drive,
                             std::span<const double> delta1, std::span<const double> delta2,
                             unsigned threads = 0);

}  // namespace wgqed

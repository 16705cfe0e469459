#pragma once

#include "wgqed/model.hpp"

#include <functional>
#include <span>
#include <vector>

namespace wgqed {

enum class PropagationMethod {
  Automatic,    ///< exponential where the generator is constant, integrator inside pulses
  Exponential,  ///< matrix exponential only (time-independent generators)
  Integrator,   ///< adaptive Dormand-Prince everywhere
};

struct PropagationOptions {
  PropagationMethod method = PropagationMethod::Automatic;
  double tolerance = 1e-9;  ///< local error per integrator step
  double initial_step = 1e-3;
  double max_step = 0.05;
  double min_step = 1e-13;
};

/// Adaptive 5(4) Dormand-Prince integration of d/dt v = rhs(t, v) from t0 to t1.
/// Throws NumericalError naming the time if the step size underflows.
VecState integrate(const std::function<VecState(double, const VecState&)>& rhs, VecState v,
                   double t0, double t1, const PropagationOptions& options = {});

/// Density matrices at every point of `times`; rho0 is the state at times.front().
std::vector<DensityMatrix> propagate(const SystemParams& sys, const DriveConfig& drive,
                                     const DensityMatrix& rho0, std::span<const double> times,
                                     const PropagationOptions& options = {});

/// Unique null vector of the CW Liouvillian. Throws NumericalError if the
/// null space is degenerate.
DensityMatrix steady_state(const SystemParams& sys, const DriveConfig& drive);
DensityMatrix steady_state(const Superoperator& liouvillian);

/// <E^dagger E> for the single-direction waveguide port.
double waveguide_intensity(const DensityMatrix& rho, const SystemParams& sys);

double excited_population(const DensityMatrix& rho, int emitter);
/// p+ and p- from the collective basis.
std::array<double, 2> collective_populations(const DensityMatrix& rho);

struct IntensityTrace {
  std::vector<double> times;
  std::vector<double> intensity;
  std::array<std::vector<double>, 2> emitter_population;
  std::vector<double> population_plus;
  std::vector<double> population_minus;
};

IntensityTrace intensity_trace(const SystemParams& sys, std::span<const double> times,
                               const std::vector<DensityMatrix>& states);

/// Pulsed excitation from |gg>; the grid must extend past the pulse.
IntensityTrace lifetime_experiment(const SystemParams& sys, const DriveConfig& drive,
                                   std::span<const double> times,
                                   const PropagationOptions& options = {});

struct BlochSample {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double weight = 0.0;  ///< p_eg + p_ge
  bool valid = false;

  /// Rotation angle about the x (imbalance) axis, measured from the |+> pole.
  double precession_angle() const;
};

/// Bloch vector of the renormalized single-excitation block: z = p+ - p-,
/// x = 2 Re rho_{+-} (equal to the renormalized p_eg - p_ge), y = -2 Im rho_{+-}.
BlochSample bloch_vector(const DensityMatrix& rho, double weight_floor = 1e-6);

struct BlochTrajectory {
  std::vector<double> times;
  std::vector<BlochSample> samples;
};

BlochTrajectory bloch_trajectory(const SystemParams& sys, const DriveConfig& drive,
                                 const DensityMatrix& rho0, std::span<const double> times,
                                 double weight_floor = 1e-6,
                                 const PropagationOptions& options = {});

/// Uniform grid start, start+step, ... up to stop (included when within step/2).
std::vector<double> uniform_grid(double start, double stop, double step);

}  // namespace wgqed

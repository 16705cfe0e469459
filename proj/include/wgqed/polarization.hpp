#pragma once

// Jones-calculus route from waveplate angles to per-emitter Rabi amplitudes.
// Light passes QWP then HWP; angles are in degrees, phases in radians.

#include "wgqed/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace wgqed {

using JonesVector = Eigen::Vector2cd;

JonesVector jones_horizontal();
JonesVector jones_vertical();
JonesVector normalized(const JonesVector& v);

struct DipoleConfig {
  std::array<JonesVector, kNumEmitters> dipoles{};

  /// sigma+ for emitter 1, sigma- for emitter 2.
  static DipoleConfig circular();
  void validate() const;
};

/// Mounting offsets added to the nominal rotation angles.
struct WaveplateOffsets {
  double qwp_deg = 0.0;
  double hwp_deg = 0.0;
};

/// Jones matrix of a retarder with fast axis at `angle` (radians) and the given retardance.
Eigen::Matrix2cd retarder(double angle, double retardance);

JonesVector waveplate_output(double qwp_deg, double hwp_deg, const JonesVector& input,
                             const WaveplateOffsets& offsets = {});

struct PolarizationDrive {
  std::array<double, kNumEmitters> amplitude{};  ///< scale * |d_m^dag eps|
  std::array<double, kNumEmitters> phase{};      ///< arg(d_m^dag eps) in [0, 2pi)

  /// theta = theta1 - theta2 in (-pi, pi].
  double relative_phase() const;
  /// Copies amplitudes and phases into `drive`, keeping its mode and pulse.
  DriveConfig apply(DriveConfig drive) const;
};

PolarizationDrive drive_from_polarization(const JonesVector& field, const DipoleConfig& dipoles,
                                          double scale = 1.0);

struct WaveplateSetting {
  double qwp_deg = 0.0;
  double hwp_deg = 0.0;
};

struct WaveplateMap {
  std::vector<double> qwp_deg;
  std::vector<double> hwp_deg;
  // row-major, index = i_qwp * hwp_deg.size() + i_hwp
  std::vector<double> a1_sq;
  std::vector<double> a2_sq;
  std::vector<double> relative;  ///< A1^2 / (A1^2 + A2^2)
  std::vector<double> phase;     ///< theta1 - theta2 in (-pi, pi]
  JonesVector input = jones_horizontal();
  DipoleConfig dipoles = DipoleConfig::circular();
  WaveplateOffsets offsets{};

  std::size_t index(std::size_t i_qwp, std::size_t i_hwp) const {
    return i_qwp * hwp_deg.size() + i_hwp;
  }
  /// Exact model evaluation at an arbitrary setting.
  PolarizationDrive evaluate(double qwp, double hwp) const;
};

WaveplateMap build_waveplate_map(const std::vector<double>& qwp_deg,
                                 const std::vector<double>& hwp_deg,
                                 const JonesVector& input = jones_horizontal(),
                                 const DipoleConfig& dipoles = DipoleConfig::circular(),
                                 const WaveplateOffsets& offsets = {}, unsigned threads = 1);

struct ContourPoint {
  double qwp_deg = 0.0;
  double hwp_deg = 0.0;
  double phase = 0.0;  ///< unwrapped along the contour
};

struct EqualAmplitudeContour {
  std::vector<ContourPoint> points;
  double phase_min = 0.0;
  double phase_max = 0.0;

  /// Interpolated setting for a target phase (taken modulo 2pi into the
  /// contour's range); nodes are returned exactly. Throws std::out_of_range
  /// if no branch of the contour reaches the phase.
  WaveplateSetting lookup(double target_phase) const;
};

/// Follows the A1 = A2 level set column by column (one point per HWP angle),
/// refining each crossing against the exact model. Throws NumericalError if
/// the scanned window contains no crossing.
EqualAmplitudeContour equal_amplitude_contour(const WaveplateMap& map);

/// lookup() followed by a secant refinement along the contour against the
/// exact model so the setting reproduces `target_phase`.
WaveplateSetting setting_for_phase(const WaveplateMap& map, const EqualAmplitudeContour& contour,
                                   double target_phase);

}  // namespace wgqed

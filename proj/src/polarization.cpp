#include "wgqed/polarization.hpp"

#include "wgqed/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace wgqed {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double amplitude_difference(const WaveplateMap& map, double qwp, double hwp) {
  const PolarizationDrive d = map.evaluate(qwp, hwp);
  return d.amplitude[0] * d.amplitude[0] - d.amplitude[1] * d.amplitude[1];
}

// Root of f on [a, b] with f(a) f(b) <= 0 (Illinois false position).
template <typename F>
double bracketed_root(F&& f, double a, double b, double fa, double fb) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  int side = 0;
  for (int iter = 0; iter < 200 && std::abs(b - a) > 1e-13 * std::max(1.0, std::abs(a)); ++iter) {
    const double c = (a * fb - b * fa) / (fb - fa);
    const double fc = f(c);
    if (fc == 0.0) return c;
    if ((fc > 0.0) == (fb > 0.0)) {
      b = c;
      fb = fc;
      if (side == -1) fa *= 0.5;
      side = -1;
    } else {
      a = c;
      fa = fc;
      if (side == 1) fb *= 0.5;
      side = 1;
    }
  }
  return std::abs(fa) < std::abs(fb) ? a : b;
}

// Crossing of A1 = A2 along the QWP axis near `guess`, searching outward in
// steps of `width` degrees.
std::optional<double> crossing_near(const WaveplateMap& map, double hwp, double guess, double width) {
  auto f = [&](double q) { return amplitude_difference(map, q, hwp); };
  const double f0 = f(guess);
  if (f0 == 0.0) return guess;
  for (int k = 1; k <= 8; ++k) {
    const double lo = guess - k * width, hi = guess + k * width;
    const double fl = f(lo), fh = f(hi);
    std::optional<double> best;
    if (fl * f0 <= 0.0) best = bracketed_root(f, lo, guess, fl, f0);
    if (fh * f0 <= 0.0) {
      const double r = bracketed_root(f, guess, hi, f0, fh);
      if (!best || std::abs(r - guess) < std::abs(*best - guess)) best = r;
    }
    if (best) return best;
  }
  return std::nullopt;
}

}  // namespace

JonesVector jones_horizontal() { return JonesVector(1.0, 0.0); }
JonesVector jones_vertical() { return JonesVector(0.0, 1.0); }

JonesVector normalized(const JonesVector& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("Jones vector has zero norm");
  return v / n;
}

DipoleConfig DipoleConfig::circular() {
  const double h = 1.0 / std::sqrt(2.0);
  DipoleConfig d;
  d.dipoles[0] = JonesVector(h, cplx(0.0, h));
  d.dipoles[1] = JonesVector(h, cplx(0.0, -h));
  return d;
}

void DipoleConfig::validate() const {
  for (const auto& d : dipoles)
    if (std::abs(d.norm() - 1.0) > 1e-12) throw std::invalid_argument("dipole Jones vectors must be unit norm");
}

Eigen::Matrix2cd retarder(double angle, double retardance) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2cd rot;
  rot << c, s, -s, c;
  Eigen::Matrix2cd phase = Eigen::Matrix2cd::Zero();
  phase(0, 0) = 1.0;
  phase(1, 1) = std::polar(1.0, retardance);
  return rot.adjoint() * phase * rot;
}

JonesVector waveplate_output(double qwp_deg, double hwp_deg, const JonesVector& input,
                             const WaveplateOffsets& offsets) {
  if (!std::isfinite(qwp_deg) || !std::isfinite(hwp_deg))
    throw std::invalid_argument("waveplate angles must be finite");
  const Eigen::Matrix2cd qwp = retarder((qwp_deg + offsets.qwp_deg) * kDeg, std::numbers::pi / 2.0);
  const Eigen::Matrix2cd hwp = retarder((hwp_deg + offsets.hwp_deg) * kDeg, std::numbers::pi);
  return hwp * (qwp * input);
}

double PolarizationDrive::relative_phase() const { return wrap_phase_symmetric(phase[0] - phase[1]); }

DriveConfig PolarizationDrive::apply(DriveConfig drive) const {
  for (int m = 0; m < kNumEmitters; ++m) {
    drive.emitters[static_cast<std::size_t>(m)].amplitude = amplitude[static_cast<std::size_t>(m)];
    drive.emitters[static_cast<std::size_t>(m)].phase = phase[static_cast<std::size_t>(m)];
  }
  return drive;
}

PolarizationDrive drive_from_polarization(const JonesVector& field, const DipoleConfig& dipoles,
                                          double scale) {
  PolarizationDrive out;
  for (std::size_t m = 0; m < dipoles.dipoles.size(); ++m) {
    const cplx a = dipoles.dipoles[m].dot(field);  // d^dag eps
    out.amplitude[m] = scale * std::abs(a);
    out.phase[m] = std::abs(a) > 0.0 ? wrap_phase(std::arg(a)) : 0.0;
  }
  return out;
}

PolarizationDrive WaveplateMap::evaluate(double qwp, double hwp) const {
  return drive_from_polarization(waveplate_output(qwp, hwp, input, offsets), dipoles);
}

WaveplateMap build_waveplate_map(const std::vector<double>& qwp_deg,
                                 const std::vector<double>& hwp_deg, const JonesVector& input,
                                 const DipoleConfig& dipoles, const WaveplateOffsets& offsets,
                                 unsigned threads) {
  if (qwp_deg.empty() || hwp_deg.empty()) throw std::invalid_argument("waveplate grids must be non-empty");
  dipoles.validate();
  WaveplateMap map;
  map.qwp_deg = qwp_deg;
  map.hwp_deg = hwp_deg;
  map.input = normalized(input);
  map.dipoles = dipoles;
  map.offsets = offsets;
  const std::size_t n = qwp_deg.size() * hwp_deg.size();
  map.a1_sq.resize(n);
  map.a2_sq.resize(n);
  map.relative.resize(n);
  map.phase.resize(n);

  parallel_for(qwp_deg.size(), threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < hwp_deg.size(); ++j) {
      const PolarizationDrive d = map.evaluate(qwp_deg[i], hwp_deg[j]);
      const std::size_t k = map.index(i, j);
      map.a1_sq[k] = d.amplitude[0] * d.amplitude[0];
      map.a2_sq[k] = d.amplitude[1] * d.amplitude[1];
      const double total = map.a1_sq[k] + map.a2_sq[k];
      map.relative[k] = total > 0.0 ? map.a1_sq[k] / total : 0.0;
      map.phase[k] = d.relative_phase();
    }
  });
  return map;
}

EqualAmplitudeContour equal_amplitude_contour(const WaveplateMap& map) {
  const std::size_t nq = map.qwp_deg.size(), nh = map.hwp_deg.size();
  if (nq < 2 || nh < 1) throw std::invalid_argument("contour extraction needs at least two QWP angles");

  auto column_roots = [&](std::size_t j) {
    std::vector<double> roots;
    const double h = map.hwp_deg[j];
    auto f = [&](double q) { return amplitude_difference(map, q, h); };
    for (std::size_t i = 0; i + 1 < nq; ++i) {
      const double fa = map.a1_sq[map.index(i, j)] - map.a2_sq[map.index(i, j)];
      const double fb = map.a1_sq[map.index(i + 1, j)] - map.a2_sq[map.index(i + 1, j)];
      if (fa * fb > 0.0) continue;
      const double r = bracketed_root(f, map.qwp_deg[i], map.qwp_deg[i + 1], fa, fb);
      if (roots.empty() || std::abs(r - roots.back()) > 1e-9) roots.push_back(r);
    }
    return roots;
  };

  EqualAmplitudeContour contour;
  const double centre = 0.5 * (map.qwp_deg.front() + map.qwp_deg.back());
  std::optional<double> previous_q;
  double previous_raw = 0.0;
  for (std::size_t j = 0; j < nh; ++j) {
    const auto roots = column_roots(j);
    if (roots.empty()) continue;
    const double anchor = previous_q ? *previous_q : centre;
    const double q = *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
      return std::abs(a - anchor) < std::abs(b - anchor);
    });
    const double raw = map.evaluate(q, map.hwp_deg[j]).relative_phase();
    ContourPoint p{q, map.hwp_deg[j], raw};
    if (!contour.points.empty()) p.phase = contour.points.back().phase + wrap_phase_symmetric(raw - previous_raw);
    contour.points.push_back(p);
    previous_q = q;
    previous_raw = raw;
  }
  if (contour.points.empty())
    throw NumericalError("equal-amplitude level set is empty in the scanned waveplate window");

  contour.phase_min = contour.phase_max = contour.points.front().phase;
  for (const auto& p : contour.points) {
    contour.phase_min = std::min(contour.phase_min, p.phase);
    contour.phase_max = std::max(contour.phase_max, p.phase);
  }
  return contour;
}

WaveplateSetting EqualAmplitudeContour::lookup(double target_phase) const {
  if (points.empty()) throw std::out_of_range("contour is empty");
  if (!std::isfinite(target_phase)) throw std::out_of_range("target phase is not finite");
  const int k_lo = static_cast<int>(std::ceil((phase_min - target_phase) / kTwoPi));
  const int k_hi = static_cast<int>(std::floor((phase_max - target_phase) / kTwoPi));
  for (int k = k_lo; k <= k_hi; ++k) {
    const double x = target_phase + k * kTwoPi;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].phase == x) return {points[i].qwp_deg, points[i].hwp_deg};
      if (i + 1 == points.size()) break;
      const double p0 = points[i].phase, p1 = points[i + 1].phase;
      if ((p0 - x) * (p1 - x) < 0.0) {
        const double t = (x - p0) / (p1 - p0);
        return {points[i].qwp_deg + t * (points[i + 1].qwp_deg - points[i].qwp_deg),
                points[i].hwp_deg + t * (points[i + 1].hwp_deg - points[i].hwp_deg)};
      }
    }
  }
  std::ostringstream os;
  os << "phase " << target_phase << " rad is not reached along the contour (range " << phase_min
     << " to " << phase_max << ")";
  throw std::out_of_range(os.str());
}

WaveplateSetting setting_for_phase(const WaveplateMap& map, const EqualAmplitudeContour& contour,
                                   double target_phase) {
  WaveplateSetting guess = contour.lookup(target_phase);
  const double width =
      map.qwp_deg.size() > 1 ? std::abs(map.qwp_deg[1] - map.qwp_deg[0]) : 1.0;

  double q_last = guess.qwp_deg;
  auto residual = [&](double h) -> std::optional<double> {
    const auto q = crossing_near(map, h, q_last, width);
    if (!q) return std::nullopt;
    q_last = *q;
    return wrap_phase_symmetric(map.evaluate(*q, h).relative_phase() - target_phase);
  };

  double h0 = guess.hwp_deg;
  auto r0 = residual(h0);
  if (!r0) return guess;
  WaveplateSetting best{q_last, h0};
  double best_r = std::abs(*r0);
  double h1 = h0 + 1e-3;
  auto r1 = residual(h1);
  for (int iter = 0; iter < 60 && r1; ++iter) {
    if (std::abs(*r1) < best_r) {
      best_r = std::abs(*r1);
      best = {q_last, h1};
    }
    if (best_r < 1e-13 || *r1 == *r0) break;
    const double h2 = h1 - *r1 * (h1 - h0) / (*r1 - *r0);
    h0 = h1;
    r0 = r1;
    h1 = h2;
    r1 = residual(h1);
  }
  return best;
}

}  // namespace wgqed

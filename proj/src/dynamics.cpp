#include "wgqed/dynamics.hpp"

#include "wgqed/expm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace wgqed {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5.0},
    {3.0 / 40.0, 9.0 / 40.0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
    {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0},
};
constexpr double kB[7] = {35.0 / 384.0,     0.0, 500.0 / 1113.0, 125.0 / 192.0,
                          -2187.0 / 6784.0, 11.0 / 84.0, 0.0};
constexpr double kE[7] = {71.0 / 57600.0,      0.0,          -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0};

DensityMatrix hermitian_part(const DensityMatrix& rho) { return 0.5 * (rho + rho.adjoint()); }

void check_grid(std::span<const double> times) {
  if (times.empty()) throw std::invalid_argument("time grid is empty");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k])) throw std::invalid_argument("time grid contains non-finite values");
    if (k > 0 && !(times[k] > times[k - 1]))
      throw std::invalid_argument("time grid must be strictly increasing");
  }
}

class Propagator {
 public:
  Propagator(const SystemParams& sys, const DriveConfig& drive, const PropagationOptions& options)
      : drive_(drive), parts_(build_liouvillian_parts(sys, drive)), options_(options) {
    if (drive.mode == DriveMode::Pulsed) {
      options_.max_step = std::min(options_.max_step, 0.5 * drive.pulse.sigma());
      options_.initial_step = std::min(options_.initial_step, 0.1 * drive.pulse.sigma());
    }
    if (options.method == PropagationMethod::Exponential && drive.mode == DriveMode::Pulsed)
      throw std::invalid_argument("exponential propagation requires a time-independent drive");
  }

  VecState advance(const VecState& v, double a, double b) {
    if (options_.method == PropagationMethod::Integrator) return integrate_piece(v, a, b);
    if (drive_.mode == DriveMode::CW) return exponential_piece(v, a, b);

    const double s0 = drive_.pulse.support_begin();
    const double s1 = drive_.pulse.support_end();
    VecState out = v;
    double t = a;
    if (t < s0) {
      const double end = std::min(b, s0);
      out = exponential_piece(out, t, end);
      t = end;
    }
    if (t < b && t < s1) {
      const double end = std::min(b, s1);
      out = integrate_piece(out, t, end);
      t = end;
    }
    if (t < b) out = exponential_piece(out, t, b);
    return out;
  }

 private:
  const Superoperator& static_generator() {
    if (!static_ready_) {
      static_generator_ = parts_.fixed;
      if (drive_.mode == DriveMode::CW) static_generator_ += parts_.drive_part;
      static_ready_ = true;
    }
    return static_generator_;
  }

  VecState exponential_piece(const VecState& v, double a, double b) {
    const double dt = b - a;
    auto it = cache_.find(dt);
    if (it == cache_.end()) {
      const Superoperator gen = static_generator() * dt;
      it = cache_.emplace(dt, expm(gen)).first;
    }
    return it->second * v;
  }

  VecState integrate_piece(const VecState& v, double a, double b) {
    const auto rhs = [this](double t, const VecState& x) -> VecState {
      const double env = drive_.envelope(t);
      if (env == 0.0) return parts_.fixed * x;
      return parts_.fixed * x + env * (parts_.drive_part * x);
    };
    return integrate(rhs, v, a, b, options_);
  }

  DriveConfig drive_;
  LiouvillianParts parts_;
  PropagationOptions options_;
  Superoperator static_generator_;
  bool static_ready_ = false;
  std::map<double, Superoperator> cache_;
};

}  // namespace

VecState integrate(const std::function<VecState(double, const VecState&)>& rhs, VecState v,
                   double t0, double t1, const PropagationOptions& options) {
  if (!(t1 > t0)) return v;
  const double tol = options.tolerance;
  double t = t0;
  double h = std::min({options.initial_step, options.max_step, t1 - t0});
  std::array<VecState, 7> k;
  k[0] = rhs(t, v);

  while (t < t1) {
    if (t + h > t1) h = t1 - t;
    if (h < options.min_step * std::max(1.0, std::abs(t))) {
      std::ostringstream os;
      os << "integrator step size underflow at t = " << t << " ns";
      throw NumericalError(os.str());
    }

    for (int s = 1; s < 7; ++s) {
      VecState y = v;
      for (int j = 0; j < s; ++j)
        if (kA[s][j] != 0.0) y += (h * kA[s][j]) * k[static_cast<std::size_t>(j)];
      k[static_cast<std::size_t>(s)] = rhs(t + kC[s] * h, y);
    }
    VecState next = v;
    VecState err = VecState::Zero();
    for (int s = 0; s < 7; ++s) {
      if (kB[s] != 0.0) next += (h * kB[s]) * k[static_cast<std::size_t>(s)];
      if (kE[s] != 0.0) err += (h * kE[s]) * k[static_cast<std::size_t>(s)];
    }

    double ratio = 0.0;
    for (int i = 0; i < 16; ++i) {
      const double scale = tol + tol * std::max(std::abs(v(i)), std::abs(next(i)));
      ratio = std::max(ratio, std::abs(err(i)) / scale);
    }
    if (!std::isfinite(ratio)) {
      std::ostringstream os;
      os << "integrator produced non-finite values at t = " << t << " ns";
      throw NumericalError(os.str());
    }

    if (ratio <= 1.0) {
      t += h;
      v = next;
      k[0] = k[6];  // FSAL: last stage was evaluated at (t + h, next)
    }
    const double factor = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
    h = std::min(h * factor, options.max_step);
  }
  return v;
}

std::vector<DensityMatrix> propagate(const SystemParams& sys, const DriveConfig& drive,
                                     const DensityMatrix& rho0, std::span<const double> times,
                                     const PropagationOptions& options) {
  sys.validate();
  drive.validate();
  check_grid(times);
  validate_density_matrix(rho0, {1e-10, 1e-10, 1e-10});

  Propagator prop(sys, drive, options);
  std::vector<DensityMatrix> out;
  out.reserve(times.size());
  VecState v = vectorize(rho0);
  out.push_back(rho0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    v = prop.advance(v, times[k - 1], times[k]);
    out.push_back(hermitian_part(unvectorize(v)));
  }
  return out;
}

DensityMatrix steady_state(const Superoperator& liouvillian) {
  Eigen::JacobiSVD<Superoperator> svd(liouvillian, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double largest = sv(0);
  const double threshold = 1e-10 * std::max(1.0, largest);

  if (sv(14) <= threshold) {
    int dim = 0;
    for (int i = 0; i < 16; ++i)
      if (sv(i) <= threshold) ++dim;
    std::ostringstream os;
    os << "steady state is not unique: Liouvillian null space has dimension " << dim
       << "; stationary states populate";
    for (int i = 16 - dim; i < 16; ++i) {
      const DensityMatrix m = to_collective_basis(unvectorize(svd.matrixV().col(i)));
      os << " {";
      const char* names[4] = {"gg", "+", "-", "ee"};
      bool first = true;
      for (int j = 0; j < 4; ++j) {
        if (std::abs(m(j, j)) > 1e-6) {
          os << (first ? "" : ", ") << "|" << names[j] << ">";
          first = false;
        }
      }
      os << "}";
    }
    throw NumericalError(os.str());
  }

  VecState x = svd.matrixV().col(15);
  const cplx tr = unvectorize(x).trace();
  if (std::abs(tr) < 1e-14) throw NumericalError("steady-state null vector is traceless");
  x /= tr;

  // Weak drives leave populations many orders below one; refine against the
  // trace-bordered system with extended-precision residuals so they keep
  // their relative accuracy.
  using Bordered = Eigen::Matrix<cplx, 17, 16>;
  using Wide = std::complex<long double>;
  Bordered a;
  a.topRows<16>() = liouvillian;
  a.row(16) = vectorize(DensityMatrix::Identity()).transpose();
  const Eigen::Matrix<Wide, 17, 16> a_wide = a.cast<Wide>();
  Eigen::Matrix<Wide, 17, 1> b_wide = Eigen::Matrix<Wide, 17, 1>::Zero();
  b_wide(16) = 1.0L;
  const Eigen::ColPivHouseholderQR<Bordered> qr(a);
  for (int iter = 0; iter < 3; ++iter) {
    const Eigen::Matrix<Wide, 17, 1> r = b_wide - a_wide * x.cast<Wide>();
    x += qr.solve(Eigen::Matrix<cplx, 17, 1>(r.cast<cplx>()));
  }
  return hermitian_part(unvectorize(x));
}

DensityMatrix steady_state(const SystemParams& sys, const DriveConfig& drive) {
  sys.validate();
  drive.validate();
  if (drive.mode != DriveMode::CW)
    throw std::invalid_argument("steady state requires a CW drive");
  return steady_state(build_liouvillian(sys, drive, 0.0));
}

double waveguide_intensity(const DensityMatrix& rho, const SystemParams& sys) {
  const Operator e = waveguide_field(sys);
  return std::max(0.0, (e.adjoint() * e * rho).trace().real());
}

double excited_population(const DensityMatrix& rho, int emitter) {
  return (excited_projector(emitter) * rho).trace().real();
}

std::array<double, 2> collective_populations(const DensityMatrix& rho) {
  const DensityMatrix c = to_collective_basis(rho);
  return {c(kPlus, kPlus).real(), c(kMinus, kMinus).real()};
}

IntensityTrace intensity_trace(const SystemParams& sys, std::span<const double> times,
                               const std::vector<DensityMatrix>& states) {
  IntensityTrace trace;
  trace.times.assign(times.begin(), times.end());
  for (const auto& rho : states) {
    trace.intensity.push_back(waveguide_intensity(rho, sys));
    for (int i = 0; i < kNumEmitters; ++i)
      trace.emitter_population[static_cast<std::size_t>(i)].push_back(
          std::clamp(excited_population(rho, i), 0.0, 1.0));
    const auto pc = collective_populations(rho);
    trace.population_plus.push_back(std::clamp(pc[0], 0.0, 1.0));
    trace.population_minus.push_back(std::clamp(pc[1], 0.0, 1.0));
  }
  return trace;
}

IntensityTrace lifetime_experiment(const SystemParams& sys, const DriveConfig& drive,
                                   std::span<const double> times,
                                   const PropagationOptions& options) {
  if (drive.mode != DriveMode::Pulsed)
    throw std::invalid_argument("lifetime experiment requires a pulsed drive");
  check_grid(times);
  if (times.back() < drive.pulse.support_end())
    throw std::invalid_argument("time grid must extend past the end of the pulse");
  const auto states = propagate(sys, drive, basis_state(kGG), times, options);
  return intensity_trace(sys, times, states);
}

double BlochSample::precession_angle() const { return std::atan2(y, z); }

BlochSample bloch_vector(const DensityMatrix& rho, double weight_floor) {
  if (!(weight_floor > 0.0)) throw std::invalid_argument("weight floor must be > 0");
  const DensityMatrix c = to_collective_basis(rho);
  BlochSample s;
  s.weight = (c(kPlus, kPlus) + c(kMinus, kMinus)).real();
  if (s.weight < weight_floor) return s;
  const cplx coherence = c(kPlus, kMinus) / s.weight;
  s.z = (c(kPlus, kPlus) - c(kMinus, kMinus)).real() / s.weight;
  s.x = 2.0 * coherence.real();
  s.y = -2.0 * coherence.imag();
  s.valid = true;
  return s;
}

BlochTrajectory bloch_trajectory(const SystemParams& sys, const DriveConfig& drive,
                                 const DensityMatrix& rho0, std::span<const double> times,
                                 double weight_floor, const PropagationOptions& options) {
  if (!(weight_floor > 0.0)) throw std::invalid_argument("weight floor must be > 0");
  const auto states = propagate(sys, drive, rho0, times, options);
  BlochTrajectory traj;
  traj.times.assign(times.begin(), times.end());
  for (const auto& rho : states) traj.samples.push_back(bloch_vector(rho, weight_floor));
  return traj;
}

std::vector<double> uniform_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) throw std::invalid_argument("invalid uniform grid");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
  std::vector<double> grid(n);
  const bool commensurate =
      std::abs(start + static_cast<double>(n - 1) * step - stop) <= 1e-9 * step;
  // Fill from both ends when stop lies on the grid so grids symmetric about
  // zero are symmetric to the last bit.
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t back = n - 1 - k;
    grid[k] = (commensurate && k > back) ? stop - static_cast<double>(back) * step
                                         : start + static_cast<double>(k) * step;
  }
  return grid;
}

}  // namespace wgqed

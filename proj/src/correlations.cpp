#include "wgqed/correlations.hpp"

#include "wgqed/dynamics.hpp"
#include "wgqed/expm.hpp"
#include "wgqed/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace wgqed {

namespace {

void check_taus(std::span<const double> taus) {
  for (double t : taus)
    if (!std::isfinite(t)) throw std::invalid_argument("tau grid contains non-finite values");
}

void require_cw(const DriveConfig& drive) {
  if (drive.mode != DriveMode::CW) throw std::invalid_argument("g2 requires a CW drive");
}

double emitted_intensity(const Operator& e, const DensityMatrix& rho) {
  const double i = (e.adjoint() * e * rho).trace().real();
  if (!(i > 1e-300)) throw NumericalError("steady-state waveguide intensity is zero; g2 is undefined");
  return i;
}

}  // namespace

std::vector<double> default_tau_grid() { return uniform_grid(-5.0, 5.0, 0.005); }

CorrelationTrace g2_regression(const SystemParams& sys, const DriveConfig& drive,
                               std::span<const double> taus) {
  sys.validate();
  drive.validate();
  require_cw(drive);
  return g2_regression(sys, drive, steady_state(sys, drive), taus);
}

CorrelationTrace g2_regression(const SystemParams& sys, const DriveConfig& drive,
                               const DensityMatrix& rho_ss, std::span<const double> taus) {
  require_cw(drive);
  check_taus(taus);
  const Operator e = waveguide_field(sys);
  const Operator n = e.adjoint() * e;

  CorrelationTrace out;
  out.taus.assign(taus.begin(), taus.end());
  out.intensity = emitted_intensity(e, rho_ss);
  out.G2.assign(taus.size(), 0.0);
  out.g2.assign(taus.size(), 0.0);

  std::vector<std::size_t> order(taus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(taus[a]) < std::abs(taus[b]);
  });

  const Superoperator l = build_liouvillian(sys, drive, 0.0);
  std::map<double, Superoperator> steps;
  const DensityMatrix conditioned = e * rho_ss * e.adjoint();
  VecState v = vectorize(conditioned);
  double at = 0.0;
  double value = (n * conditioned).trace().real();
  for (std::size_t idx : order) {
    const double target = std::abs(taus[idx]);
    if (target > at) {
      const double dt = target - at;
      auto it = steps.find(dt);
      if (it == steps.end()) it = steps.emplace(dt, expm(Superoperator(l * dt))).first;
      v = it->second * v;
      at = target;
      value = (n * unvectorize(v)).trace().real();
    }
    // G2 is a positive functional of a positive operator; clip roundoff below zero.
    out.G2[idx] = std::max(0.0, value);
    out.g2[idx] = out.G2[idx] / (out.intensity * out.intensity);
  }
  return out;
}

double g2_zero(const SystemParams& sys, const DriveConfig& drive) {
  const std::array<double, 1> zero{0.0};
  return g2_regression(sys, drive, zero).g2[0];
}

AnalyticG2 g2_analytic(const SystemParams& sys, const DriveConfig& drive,
                       std::span<const double> taus) {
  sys.validate();
  drive.validate();
  require_cw(drive);
  check_taus(taus);

  AnalyticG2 out;
  const Eigen::Matrix2cd h1 = single_excitation_hamiltonian(sys);
  const Eigen::Vector2cd omega(drive.rabi(0, 0.0), drive.rabi(1, 0.0));
  const double scale = h1.cwiseAbs().maxCoeff();
  if (std::abs(h1.determinant()) <= 1e-12 * scale * scale)
    throw NumericalError(
        "single-excitation block is singular (undamped dark mode at zero detuning); the "
        "leading-order weak-drive expansion does not exist");

  const Eigen::Vector2cd a = -h1.partialPivLu().solve(0.5 * omega);
  const auto& em = sys.emitters;
  const cplx ee_energy(em[0].detuning + em[1].detuning, -0.5 * (em[0].total_decay + em[1].total_decay));
  const cplx b = -0.5 * (omega(0) * a(1) + omega(1) * a(0)) / ee_energy;

  const Eigen::Vector2cd field(std::sqrt(em[0].waveguide_rate()),
                               std::sqrt(em[1].waveguide_rate()) * std::polar(1.0, sys.coupling_phase));
  const cplx emitted = field.cwiseProduct(a).sum();
  if (std::abs(emitted) < 1e-300) throw NumericalError("weak-drive emission amplitude vanishes");

  out.modes = single_excitation_modes(sys);
  Eigen::Matrix2cd v;
  v.col(0) = out.modes[0].vector;
  v.col(1) = out.modes[1].vector;
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(v);
  if (svd.singularValues()(1) < 1e-8 * svd.singularValues()(0))
    throw NumericalError("single-excitation block is at an exceptional point; modes are not independent");

  const Eigen::Vector2cd jumped = b * Eigen::Vector2cd(field(1), field(0)) / emitted;
  const Eigen::Vector2cd coeff = v.partialPivLu().solve(jumped - a);
  out.c_plus = coeff(0) * field.cwiseProduct(out.modes[0].vector).sum() / emitted;
  out.c_minus = coeff(1) * field.cwiseProduct(out.modes[1].vector).sum() / emitted;

  const double threshold = sys.mean_decay() / 20.0;
  out.weak_drive_warning =
      drive.emitters[0].amplitude > threshold || drive.emitters[1].amplitude > threshold;

  out.trace.taus.assign(taus.begin(), taus.end());
  const double intensity = std::norm(emitted);
  out.trace.intensity = intensity;
  for (double t : taus) {
    const double g = evaluate_g2_form(out, t);
    out.trace.g2.push_back(g);
    out.trace.G2.push_back(g * intensity * intensity);
  }
  return out;
}

double evaluate_g2_form(const AnalyticG2& form, double tau) {
  const double t = std::abs(tau);
  const cplx i(0.0, 1.0);
  const cplx amp = form.c + form.c_plus * std::exp(-i * form.modes[0].eigenvalue * t) +
                   form.c_minus * std::exp(-i * form.modes[1].eigenvalue * t);
  return std::norm(amp);
}

void apply_sweep_value(SweepAxis axis, double value, SystemParams& sys, DriveConfig& drive) {
  switch (axis) {
    case SweepAxis::DetuningSplit:
      sys = with_detuning_split(sys, value, LaserReference::Emitter1, sys.emitters[0].detuning);
      break;
    case SweepAxis::Beta2:
      sys.emitters[1].beta = value;
      break;
    case SweepAxis::DrivePhase:
      drive.emitters[1].phase = wrap_phase(drive.emitters[0].phase - value);
      break;
  }
}

SweepResult g2_sweep(const SystemParams& sys, const DriveConfig& drive, SweepAxis axis,
                     std::span<const double> values, std::span<const double> taus,
                     unsigned threads) {
  SweepResult out;
  out.axis = axis;
  out.values.assign(values.begin(), values.end());
  out.traces.resize(values.size());
  std::vector<std::string> errors(values.size());

  parallel_for(values.size(), threads, [&](std::size_t k) {
    try {
      if (!std::isfinite(values[k])) throw std::invalid_argument("sweep value is not finite");
      SystemParams s = sys;
      DriveConfig d = drive;
      apply_sweep_value(axis, values[k], s, d);
      out.traces[k] = g2_regression(s, d, taus);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });

  for (std::size_t k = 0; k < values.size(); ++k)
    if (!out.traces[k]) out.failures.push_back({k, values[k], errors[k]});
  return out;
}

}  // namespace wgqed

#include "catch_amalgamated.hpp"

#include "wgqed/dynamics.hpp"
#include "wgqed/expm.hpp"

#include <cmath>
#include <random>

using namespace wgqed;
using Catch::Approx;

namespace {

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

SystemParams ideal_pair(double gamma = 1.0) { return SystemParams::symmetric(gamma, 1.0); }

// Least-squares slope of log(y) against t.
double log_slope(const std::vector<double>& t, const std::vector<double>& y) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double ly = std::log(y[k]);
    st += t[k];
    sy += ly;
    stt += t[k] * t[k];
    sty += t[k] * ly;
  }
  return (n * sty - st * sy) / (n * stt - st * st);
}

SystemParams random_system(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SystemParams sys;
  for (auto& e : sys.emitters) {
    e.total_decay = angular_ghz(0.2 + u(rng));
    e.beta = u(rng);
    e.dephasing = angular_ghz(0.2 * u(rng));
    e.detuning = angular_ghz(4.0 * (u(rng) - 0.5));
  }
  sys.coupling_phase = kTwoPi * u(rng);
  return sys;
}

DensityMatrix random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix4cd a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cplx(n(rng), n(rng));
  DensityMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

}  // namespace

TEST_CASE("ground state is stationary without drive") {
  const auto times = uniform_grid(0.0, 5.0, 0.5);
  const auto states = propagate(ideal_pair(), DriveConfig{}, basis_state(kGG), times);
  for (const auto& rho : states) CHECK(max_abs(rho - basis_state(kGG)) < 1e-14);
}

TEST_CASE("bare excitation decays as an equal mixture of collective rates") {
  const SystemParams sys = ideal_pair(1.0);
  const auto rates = collective_rates(sys);
  const auto times = uniform_grid(0.0, 4.0, 0.1);
  const auto states = propagate(sys, DriveConfig{}, basis_state(kEG), times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double expected =
        0.5 * (std::exp(-rates.gamma_plus * times[k]) + std::exp(-rates.gamma_minus * times[k]));
    const double got = excited_population(states[k], 0) + excited_population(states[k], 1);
    CHECK(got == Approx(expected).margin(1e-12));
  }
}

TEST_CASE("dark state does not decay") {
  const auto times = uniform_grid(0.0, 10.0, 1.0);
  const auto states = propagate(ideal_pair(), DriveConfig{}, collective_state(kMinus), times);
  for (const auto& rho : states) CHECK(collective_populations(rho)[1] == Approx(1.0).margin(1e-12));
}

TEST_CASE("isolated emitter decays exponentially") {
  SystemParams sys = SystemParams::symmetric(1.7, 0.8);
  sys.emitters[1].beta = 0.0;
  const auto times = uniform_grid(0.0, 3.0, 0.25);
  const auto states = propagate(sys, DriveConfig{}, basis_state(kEG), times);
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK(excited_population(states[k], 0) == Approx(std::exp(-1.7 * times[k])).margin(1e-12));
}

TEST_CASE("propagation rejects bad grids and states") {
  const std::vector<double> bad{0.0, 1.0, 1.0};
  CHECK_THROWS_AS(propagate(ideal_pair(), DriveConfig{}, basis_state(kGG), bad),
                  std::invalid_argument);
  DensityMatrix rho = basis_state(kGG) * 2.0;
  const std::vector<double> ok{0.0, 1.0};
  CHECK_THROWS_AS(propagate(ideal_pair(), DriveConfig{}, rho, ok), NumericalError);
}

TEST_CASE("integrator reports step underflow with the failure time") {
  PropagationOptions opts;
  opts.tolerance = 1e-9;
  opts.min_step = 1e-3;
  const auto rhs = [](double, const VecState& v) -> VecState { return -1e6 * v; };
  VecState v = VecState::Ones();
  try {
    integrate(rhs, v, 0.0, 1.0, opts);
    FAIL("expected an underflow error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("t = ") != std::string::npos);
  }
}

TEST_CASE("steady state without drive is the ground state") {
  SystemParams sys = SystemParams::symmetric(1.0, 0.9);
  const DensityMatrix rho = steady_state(sys, DriveConfig::cw(0.0, 0.0));
  CHECK(max_abs(rho - basis_state(kGG)) < 1e-10);
}

TEST_CASE("steady state of a driven two-level emitter") {
  SystemParams sys = SystemParams::symmetric(1.0, 0.5);
  sys.emitters[1].beta = 0.0;
  for (double omega : {0.05, 0.3, 1.0, 4.0}) {
    const DriveConfig drive = DriveConfig::cw(omega, 0.0);
    const DensityMatrix rho = steady_state(sys, drive);
    const double expected = (omega * omega / 4.0) / (0.25 + omega * omega / 2.0);
    CHECK(excited_population(rho, 0) == Approx(expected).epsilon(1e-10));
    const VecState residual = build_liouvillian(sys, drive, 0.0) * vectorize(rho);
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-11);
    CHECK(is_valid_density_matrix(rho));
  }
}

TEST_CASE("weak drive populates collective states as inverse squared rates") {
  SystemParams sys = SystemParams::symmetric(1.0, 0.9);  // Gamma+- = 1.9, 0.1
  const auto rates = collective_rates(sys);
  REQUIRE(rates.gamma_minus == Approx(0.1));
  const DensityMatrix rho = steady_state(sys, DriveConfig::cw(sys.mean_decay() / 100.0, 0.0));
  const auto p = collective_populations(rho);
  const double ratio = std::pow(rates.gamma_plus / rates.gamma_minus, 2.0);
  CHECK(p[1] / p[0] == Approx(ratio).epsilon(0.05));
}

TEST_CASE("degenerate steady state is reported") {
  const SystemParams sys = ideal_pair(1.0);
  try {
    steady_state(sys, DriveConfig::cw(0.1, 0.0, 0.1, 0.0));
    FAIL("expected a degenerate null space");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("|->") != std::string::npos);
  }
  CHECK_THROWS_AS(steady_state(sys, DriveConfig::pulsed(GaussianPulse{}, 1.0, 0.0, 0.0, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("waveguide intensity of collective states") {
  const double g = 1.4;
  const SystemParams sys = ideal_pair(g);
  CHECK(waveguide_intensity(basis_state(kGG), sys) == 0.0);
  CHECK(waveguide_intensity(collective_state(kPlus), sys) == Approx(2.0 * g));
  CHECK(waveguide_intensity(collective_state(kMinus), sys) == Approx(0.0).margin(1e-14));

  SystemParams uncoupled = SystemParams::symmetric(g, 0.6);
  uncoupled.emitters[1].beta = 0.0;
  SystemParams quadrature = SystemParams::symmetric(g, 0.6);
  quadrature.coupling_phase = std::numbers::pi / 2.0;
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const DensityMatrix rho = random_state(rng);
    CHECK(waveguide_intensity(rho, uncoupled) == Approx(0.6 * g * excited_population(rho, 0)).epsilon(1e-12));
    const DensityMatrix diag = DensityMatrix(rho.diagonal().asDiagonal());
    const double expected = 0.6 * g * (excited_population(diag, 0) + excited_population(diag, 1));
    CHECK(waveguide_intensity(diag, quadrature) == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("propagator composition for time-independent generators") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 20; ++draw) {
    const SystemParams sys = random_system(rng);
    const DriveConfig drive = DriveConfig::cw(angular_ghz(u(rng)), 0.0, angular_ghz(u(rng)), 1.0);
    const DensityMatrix rho0 = random_state(rng);
    const double t = 0.1 + 2.0 * u(rng);
    const std::vector<double> full{0.0, t};
    const std::vector<double> halves{0.0, t / 2.0, t};
    const auto a = propagate(sys, drive, rho0, full);
    const auto b = propagate(sys, drive, rho0, halves);
    CHECK(max_abs(a.back() - b.back()) < 1e-8);
  }
}

TEST_CASE("exponential and integrator paths agree for CW drives") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PropagationOptions exp_opts, int_opts;
  exp_opts.method = PropagationMethod::Exponential;
  int_opts.method = PropagationMethod::Integrator;
  for (int draw = 0; draw < 10; ++draw) {
    const SystemParams sys = random_system(rng);
    const DriveConfig drive = DriveConfig::cw(angular_ghz(u(rng)), 2.0, angular_ghz(u(rng)), 0.5);
    const DensityMatrix rho0 = random_state(rng);
    const auto times = uniform_grid(0.0, 2.0, 0.25);
    const auto a = propagate(sys, drive, rho0, times, exp_opts);
    const auto b = propagate(sys, drive, rho0, times, int_opts);
    for (std::size_t k = 0; k < times.size(); ++k) CHECK(max_abs(a[k] - b[k]) < 1e-7);
  }
}

TEST_CASE("pulsed propagation matches a pure integrator run") {
  SystemParams sys = with_detuning_split(SystemParams::symmetric(angular_ghz(0.76), 0.9),
                                         angular_ghz(1.0));
  const DriveConfig drive = DriveConfig::pulsed(GaussianPulse{0.3, 0.05, 2.0}, 1.0, 0.0, 0.7, 1.0);
  PropagationOptions int_opts;
  int_opts.method = PropagationMethod::Integrator;
  const auto times = uniform_grid(0.0, 1.5, 0.05);
  const auto a = propagate(sys, drive, basis_state(kGG), times);
  const auto b = propagate(sys, drive, basis_state(kGG), times, int_opts);
  for (std::size_t k = 0; k < times.size(); ++k) CHECK(max_abs(a[k] - b[k]) < 1e-7);
  PropagationOptions exp_opts;
  exp_opts.method = PropagationMethod::Exponential;
  CHECK_THROWS_AS(propagate(sys, drive, basis_state(kGG), times, exp_opts), std::invalid_argument);
}

TEST_CASE("trace and positivity survive long propagation") {
  std::mt19937_64 rng(101);
  for (int draw = 0; draw < 200; ++draw) {
    const SystemParams sys = random_system(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const DriveConfig drive = DriveConfig::cw(angular_ghz(2.0 * u(rng)), kTwoPi * 0.99 * u(rng),
                                              angular_ghz(2.0 * u(rng)), kTwoPi * 0.99 * u(rng));
    const double lifetime = 1.0 / std::min(sys.emitters[0].total_decay, sys.emitters[1].total_decay);
    const auto times = uniform_grid(0.0, 100.0 * lifetime, 10.0 * lifetime);
    const auto states = propagate(sys, drive, random_state(rng), times);
    for (const auto& rho : states) {
      CHECK(std::abs(rho.trace() - 1.0) < 1e-8);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho);
      CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    }
  }
}

TEST_CASE("collective decay rates are recovered from population decay") {
  for (double split : {0.0, 0.3, 0.6}) {
    const SystemParams sys = with_detuning_split(ideal_pair(1.0), split);
    SystemParams lossy = with_detuning_split(SystemParams::symmetric(1.0, 0.9), split);
    for (const SystemParams& s : {sys, lossy}) {
      const auto modes = single_excitation_modes(s);
      const auto rates = collective_rates(s);
      for (int m = 0; m < 2; ++m) {
        const double expected = m == 0 ? rates.gamma_plus : rates.gamma_minus;
        if (expected < 1e-6) continue;
        const DensityMatrix rho0 = pure_state(embed_single_excitation(modes[static_cast<std::size_t>(m)].vector));
        const auto times = uniform_grid(0.0, 3.0 / expected, 0.05 / expected);
        const auto states = propagate(s, DriveConfig{}, rho0, times);
        std::vector<double> w;
        for (const auto& rho : states) w.push_back((rho(kEG, kEG) + rho(kGE, kGE)).real());
        CHECK(-log_slope(times, w) == Approx(expected).epsilon(1e-3));
      }
    }
  }
}

TEST_CASE("collective emission balances drive at weak CW excitation") {
  SystemParams sys = SystemParams::symmetric(1.0, 0.8);
  const auto rates = collective_rates(sys);
  const DriveConfig drive = DriveConfig::cw(sys.mean_decay() / 100.0, 0.0);
  const DensityMatrix rho = steady_state(sys, drive);
  const Operator u = collective_unitary();

  Superoperator dissipation = Superoperator::Zero();
  for (const auto& c : build_dissipators(sys)) dissipation += dissipator_superoperator(c.op, c.rate);
  const Superoperator coherent = hamiltonian_superoperator(build_hamiltonian(sys, drive, 0.0));
  const DensityMatrix d_rho = unvectorize(dissipation * vectorize(rho));
  const DensityMatrix h_rho = unvectorize(coherent * vectorize(rho));

  const auto p = collective_populations(rho);
  for (int m = 0; m < 2; ++m) {
    const int slot = m == 0 ? kPlus : kMinus;
    const Eigen::Vector4cd state = u.col(slot);
    const double outflow = -(state.adjoint() * d_rho * state)(0, 0).real();
    const double inflow = (state.adjoint() * h_rho * state)(0, 0).real();
    const double gamma = m == 0 ? rates.gamma_plus : rates.gamma_minus;
    CHECK(outflow == Approx(gamma * p[static_cast<std::size_t>(m)]).epsilon(0.01));
    CHECK(outflow == Approx(inflow).epsilon(0.01));
  }
}

TEST_CASE("area-pi pulse inverts a short-pulsed emitter") {
  // Decay during the pulse costs roughly Gamma * FWHM of the peak
  // population, so 0.999 needs FWHM below 1e-3 / Gamma.
  SystemParams sys = SystemParams::symmetric(1.0, 1.0);
  sys.emitters[1].beta = 0.0;
  const double gamma = sys.emitters[0].total_decay;
  auto peak_population = [&](double fwhm) {
    GaussianPulse pulse{0.05, fwhm, std::numbers::pi};
    const DriveConfig drive = DriveConfig::pulsed(pulse, 1.0, 0.0, 0.0, 0.0);
    const auto times = uniform_grid(0.0, pulse.support_end(), pulse.sigma() / 20.0);
    const auto states = propagate(sys, drive, basis_state(kGG), times);
    double peak = 0.0;
    for (const auto& rho : states) peak = std::max(peak, excited_population(rho, 0));
    return peak;
  };
  CHECK(peak_population(5e-4 / gamma) > 0.999);
  const double loss = 1.0 - peak_population(1e-2 / gamma);
  CHECK(loss > 0.001);
  CHECK(loss < 0.01);
}

TEST_CASE("lifetime experiment preconditions") {
  const SystemParams sys = ideal_pair(angular_ghz(0.76));
  const auto times = uniform_grid(0.0, 0.25, 0.01);
  CHECK_THROWS_AS(lifetime_experiment(sys, DriveConfig::cw(1.0, 0.0), times), std::invalid_argument);
  const DriveConfig pulsed = DriveConfig::pulsed(GaussianPulse{}, 1.0, 0.0, 1.0, 0.0);
  CHECK_THROWS_AS(lifetime_experiment(sys, pulsed, times), std::invalid_argument);
}

TEST_CASE("weak in-phase pulse decays at the superradiant rate") {
  const SystemParams sys = ideal_pair(angular_ghz(0.76));
  const auto rates = collective_rates(sys);
  const DriveConfig drive = DriveConfig::pulsed(GaussianPulse{0.2, 0.05, 0.02}, 1.0, 0.0, 1.0, 0.0);
  const auto times = uniform_grid(0.0, 1.5, 0.005);
  const auto trace = lifetime_experiment(sys, drive, times);
  std::vector<double> t, y;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < drive.pulse.support_end() || times[k] > 1.0) continue;
    t.push_back(times[k]);
    y.push_back(trace.intensity[k]);
  }
  CHECK(-log_slope(t, y) == Approx(rates.gamma_plus).epsilon(0.01));
  for (std::size_t k = 1; k < times.size(); ++k)
    if (times[k - 1] >= drive.pulse.support_end()) CHECK(trace.intensity[k] <= trace.intensity[k - 1]);
}

TEST_CASE("in-phase quarter-pi pulse follows the doubly-excited cascade") {
  // After the pulse: p_ee(t) = p_ee e^{-G t}, p_+(t) = (p_+ + G t p_ee) e^{-G t},
  // I = G (p_+ + p_ee), with G = Gamma+ = 2 Gamma for the ideal pair.
  const SystemParams sys = ideal_pair(angular_ghz(0.76));
  const double g = collective_rates(sys).gamma_plus;
  const DriveConfig drive =
      DriveConfig::pulsed(GaussianPulse{0.2, 0.05, std::numbers::pi / 4.0}, 1.0, 0.0, 1.0, 0.0);
  const auto times = uniform_grid(0.0, 1.5, 0.005);
  const auto states = propagate(sys, drive, basis_state(kGG), times);
  std::size_t start = 0;
  while (times[start] < drive.pulse.support_end()) ++start;
  const DensityMatrix c0 = to_collective_basis(states[start]);
  const double p_plus = c0(kPlus, kPlus).real(), p_ee = c0(kCollEE, kCollEE).real();
  for (std::size_t k = start; k < times.size(); ++k) {
    const double dt = times[k] - times[start];
    const double expected = g * std::exp(-g * dt) * (p_plus + p_ee + g * dt * p_ee);
    CHECK(waveguide_intensity(states[k], sys) == Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("bloch vector conventions") {
  const BlochSample plus = bloch_vector(collective_state(kPlus));
  CHECK(plus.valid);
  CHECK(plus.z == Approx(1.0));
  const BlochSample bare = bloch_vector(basis_state(kEG));
  CHECK(bare.z == Approx(0.0).margin(1e-15));
  CHECK(bare.x == Approx(1.0));
  CHECK(bare.y == Approx(0.0).margin(1e-15));
  CHECK_FALSE(bloch_vector(basis_state(kGG)).valid);
  CHECK_THROWS_AS(bloch_vector(basis_state(kGG), 0.0), std::invalid_argument);
}

TEST_CASE("superradiant state stays at its pole") {
  const auto times = uniform_grid(0.0, 0.5, 0.05);
  const auto traj = bloch_trajectory(ideal_pair(angular_ghz(0.76)), DriveConfig{},
                                     collective_state(kPlus), times);
  for (const auto& s : traj.samples) {
    REQUIRE(s.valid);
    CHECK(s.z == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("bloch trajectory matches effective-hamiltonian evolution") {
  for (double beta : {0.0, 0.7, 1.0}) {
    const SystemParams sys = with_detuning_split(SystemParams::symmetric(angular_ghz(0.76), beta),
                                                 angular_ghz(2.0));
    const auto times = uniform_grid(0.0, 2.0, 0.02);
    const auto traj = bloch_trajectory(sys, DriveConfig{}, collective_state(kMinus), times);
    const Eigen::Matrix2cd h = single_excitation_hamiltonian(sys);
    const Eigen::Vector2cd psi0(1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0));
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Eigen::Matrix2cd gen = cplx(0.0, -1.0) * h * times[k];
      Eigen::Vector2cd psi = expm(gen) * psi0;
      const double w = psi.squaredNorm();
      psi /= std::sqrt(w);
      const cplx cp = (psi(0) + psi(1)) / std::sqrt(2.0);
      const cplx cm = (psi(0) - psi(1)) / std::sqrt(2.0);
      const auto& s = traj.samples[k];
      REQUIRE(s.valid);
      CHECK(s.weight == Approx(w).epsilon(1e-9));
      CHECK(s.z == Approx(std::norm(cp) - std::norm(cm)).margin(1e-8));
      CHECK(s.x == Approx(2.0 * (cp * std::conj(cm)).real()).margin(1e-8));
      CHECK(s.y == Approx(-2.0 * (cp * std::conj(cm)).imag()).margin(1e-8));
      CHECK(std::sqrt(s.x * s.x + s.y * s.y + s.z * s.z) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("without dissipative coupling the dark state precesses at the detuning") {
  const double split = angular_ghz(2.0);
  const SystemParams sys = with_detuning_split(SystemParams::symmetric(angular_ghz(0.76), 0.0), split);
  const auto times = uniform_grid(0.0, 1.0, 0.01);
  const auto traj = bloch_trajectory(sys, DriveConfig{}, collective_state(kMinus), times);
  double unwrapped = traj.samples[0].precession_angle();
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double prev = traj.samples[k - 1].precession_angle();
    unwrapped += wrap_phase_symmetric(traj.samples[k].precession_angle() - prev);
    CHECK(std::abs(traj.samples[k].x) < 1e-9);
  }
  CHECK(std::abs(unwrapped - traj.samples[0].precession_angle()) == Approx(split * 1.0).epsilon(1e-9));
}

TEST_CASE("uniform grid endpoints") {
  const auto g = uniform_grid(-5.0, 5.0, 0.005);
  CHECK(g.size() == 2001);
  CHECK(g.front() == -5.0);
  CHECK(g.back() == Approx(5.0));
  CHECK_THROWS_AS(uniform_grid(0.0, 1.0, 0.0), std::invalid_argument);
}

#include "wgqed/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wgqed {

namespace {

using Block16 = Superoperator;

Block16 kron(const Operator& a, const Operator& b) {
  Block16 out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out.block<4, 4>(4 * i, 4 * j) = a(i, j) * b;
  return out;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace

void EmitterParams::validate() const {
  require(std::isfinite(total_decay) && total_decay > 0.0, "emitter total decay must be > 0");
  require(std::isfinite(beta) && beta >= 0.0 && beta <= 1.0, "emitter beta must lie in [0, 1]");
  require(std::isfinite(dephasing) && dephasing >= 0.0, "emitter dephasing must be >= 0");
  require(std::isfinite(detuning), "emitter detuning must be finite");
}

double SystemParams::dissipative_coupling() const {
  return std::sqrt(emitters[0].waveguide_rate() * emitters[1].waveguide_rate()) *
         std::cos(coupling_phase);
}

double SystemParams::coherent_coupling() const {
  return 0.5 * std::sqrt(emitters[0].waveguide_rate() * emitters[1].waveguide_rate()) *
         std::sin(coupling_phase);
}

void SystemParams::validate() const {
  for (const auto& e : emitters) e.validate();
  require(std::isfinite(coupling_phase), "coupling phase must be finite");
}

SystemParams SystemParams::symmetric(double gamma, double beta) {
  SystemParams sys;
  for (auto& e : sys.emitters) {
    e.total_decay = gamma;
    e.beta = beta;
  }
  return sys;
}

SystemParams with_detuning_split(SystemParams sys, double split, LaserReference reference,
                                 double center) {
  switch (reference) {
    case LaserReference::Symmetric:
      sys.emitters[0].detuning = center + 0.5 * split;
      sys.emitters[1].detuning = center - 0.5 * split;
      break;
    case LaserReference::Emitter1:
      sys.emitters[0].detuning = center;
      sys.emitters[1].detuning = center - split;
      break;
  }
  return sys;
}

double GaussianPulse::sigma() const { return fwhm / std::sqrt(8.0 * std::log(2.0)); }

double GaussianPulse::support_begin() const { return center - 8.0 * sigma(); }
double GaussianPulse::support_end() const { return center + 8.0 * sigma(); }

double GaussianPulse::envelope(double t) const {
  if (t < support_begin() || t > support_end()) return 0.0;
  const double s = sigma();
  const double x = (t - center) / s;
  return area / (s * std::sqrt(kTwoPi)) * std::exp(-0.5 * x * x);
}

double DriveConfig::envelope(double t) const {
  return mode == DriveMode::CW ? 1.0 : pulse.envelope(t);
}

cplx DriveConfig::rabi(int emitter, double t) const {
  const auto& d = emitters.at(static_cast<std::size_t>(emitter));
  return std::polar(d.amplitude * envelope(t), d.phase);
}

bool DriveConfig::is_zero() const {
  for (const auto& d : emitters)
    if (d.amplitude != 0.0) return false;
  return true;
}

void DriveConfig::validate() const {
  for (const auto& d : emitters) {
    require(std::isfinite(d.amplitude) && d.amplitude >= 0.0, "drive amplitude must be >= 0");
    require(std::isfinite(d.phase) && d.phase >= 0.0 && d.phase < kTwoPi,
            "drive phase must lie in [0, 2pi)");
  }
  if (mode == DriveMode::Pulsed) {
    require(std::isfinite(pulse.area) && pulse.area > 0.0, "pulse area must be > 0");
    require(std::isfinite(pulse.fwhm) && pulse.fwhm > 0.0, "pulse FWHM must be > 0");
    require(std::isfinite(pulse.center), "pulse center must be finite");
  }
}

DriveConfig DriveConfig::cw(double amp1, double phase1, double amp2, double phase2) {
  DriveConfig d;
  d.emitters[0] = {amp1, wrap_phase(phase1)};
  d.emitters[1] = {amp2, wrap_phase(phase2)};
  return d;
}

DriveConfig DriveConfig::pulsed(const GaussianPulse& pulse, double weight1, double phase1,
                                double weight2, double phase2) {
  DriveConfig d = cw(weight1, phase1, weight2, phase2);
  d.mode = DriveMode::Pulsed;
  d.pulse = pulse;
  return d;
}

double wrap_phase(double phase) {
  double w = std::fmod(phase, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

double wrap_phase_symmetric(double phase) {
  double w = wrap_phase(phase);
  if (w > std::numbers::pi) w -= kTwoPi;
  return w;
}

Operator lowering(int emitter) {
  Operator s = Operator::Zero();
  if (emitter == 0) {
    s(kGG, kEG) = 1.0;
    s(kGE, kEE) = 1.0;
  } else if (emitter == 1) {
    s(kGG, kGE) = 1.0;
    s(kEG, kEE) = 1.0;
  } else {
    throw std::out_of_range("emitter index must be 0 or 1");
  }
  return s;
}

Operator excited_projector(int emitter) {
  const Operator s = lowering(emitter);
  return s.adjoint() * s;
}

Operator basis_projector(int index) {
  Operator p = Operator::Zero();
  p(index, index) = 1.0;
  return p;
}

Operator waveguide_field(const SystemParams& sys) {
  return std::sqrt(sys.emitters[0].waveguide_rate()) * lowering(0) +
         std::sqrt(sys.emitters[1].waveguide_rate()) * std::polar(1.0, sys.coupling_phase) *
             lowering(1);
}

Operator build_hamiltonian(const SystemParams& sys, const DriveConfig& drive, double t) {
  Operator h = Operator::Zero();
  for (int i = 0; i < kNumEmitters; ++i)
    h += sys.emitters[static_cast<std::size_t>(i)].detuning * excited_projector(i);

  const Operator s1 = lowering(0);
  const Operator s2 = lowering(1);
  h += sys.coherent_coupling() * (s1.adjoint() * s2 + s2.adjoint() * s1);

  for (int m = 0; m < kNumEmitters; ++m) {
    const cplx omega = drive.rabi(m, t);
    const Operator s = lowering(m);
    h += 0.5 * (omega * s.adjoint() + std::conj(omega) * s);
  }
  return h;
}

std::vector<JumpChannel> build_dissipators(const SystemParams& sys) {
  std::vector<JumpChannel> channels;

  const double g1 = sys.emitters[0].waveguide_rate();
  const double g2 = sys.emitters[1].waveguide_rate();
  Eigen::Matrix2d rates;
  rates << g1, sys.dissipative_coupling(), sys.dissipative_coupling(), g2;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(rates);
  for (int k = 0; k < 2; ++k) {
    const double rate = std::max(0.0, eig.eigenvalues()(k));
    const Eigen::Vector2d v = eig.eigenvectors().col(k);
    channels.push_back({v(0) * lowering(0) + v(1) * lowering(1), rate, ChannelKind::Waveguide});
  }

  for (int i = 0; i < kNumEmitters; ++i) {
    const auto& e = sys.emitters[static_cast<std::size_t>(i)];
    if (e.loss_rate() > 0.0) channels.push_back({lowering(i), e.loss_rate(), ChannelKind::Loss});
  }
  for (int i = 0; i < kNumEmitters; ++i) {
    const auto& e = sys.emitters[static_cast<std::size_t>(i)];
    if (e.dephasing > 0.0)
      channels.push_back({excited_projector(i), 2.0 * e.dephasing, ChannelKind::Dephasing});
  }
  return channels;
}

Superoperator hamiltonian_superoperator(const Operator& h) {
  const Operator id = Operator::Identity();
  return cplx(0.0, -1.0) * (kron(id, h) - kron(h.transpose(), id));
}

Superoperator dissipator_superoperator(const Operator& jump, double rate) {
  const Operator id = Operator::Identity();
  const Operator n = jump.adjoint() * jump;
  return rate * (kron(jump.conjugate(), jump) - 0.5 * kron(id, n) - 0.5 * kron(n.transpose(), id));
}

LiouvillianParts build_liouvillian_parts(const SystemParams& sys, const DriveConfig& drive) {
  DriveConfig undriven = drive;
  for (auto& d : undriven.emitters) d.amplitude = 0.0;

  LiouvillianParts parts;
  parts.fixed = hamiltonian_superoperator(build_hamiltonian(sys, undriven, 0.0));
  for (const auto& ch : build_dissipators(sys))
    if (ch.rate > 0.0) parts.fixed += dissipator_superoperator(ch.op, ch.rate);

  // Drive term at unit envelope.
  Operator hd = Operator::Zero();
  for (int m = 0; m < kNumEmitters; ++m) {
    const auto& d = drive.emitters[static_cast<std::size_t>(m)];
    const cplx omega = std::polar(d.amplitude, d.phase);
    const Operator s = lowering(m);
    hd += 0.5 * (omega * s.adjoint() + std::conj(omega) * s);
  }
  parts.drive_part = hamiltonian_superoperator(hd);
  return parts;
}

Superoperator build_liouvillian(const SystemParams& sys, const DriveConfig& drive, double t) {
  const auto parts = build_liouvillian_parts(sys, drive);
  return parts.fixed + drive.envelope(t) * parts.drive_part;
}

VecState vectorize(const DensityMatrix& rho) {
  return Eigen::Map<const VecState>(rho.data());
}

DensityMatrix unvectorize(const VecState& v) {
  return Eigen::Map<const DensityMatrix>(v.data());
}

CollectiveRates collective_rates(const SystemParams& sys) {
  const double g12 = sys.dissipative_coupling();
  const double split = sys.detuning_split();
  CollectiveRates r;
  r.mean_decay = sys.mean_decay();
  r.splitting = std::sqrt(cplx(g12 * g12 - split * split, 0.0));
  r.gamma_plus = r.mean_decay + r.splitting.real();
  r.gamma_minus = r.mean_decay - r.splitting.real();
  return r;
}

Eigen::Matrix2cd single_excitation_hamiltonian(const SystemParams& sys) {
  const auto& e1 = sys.emitters[0];
  const auto& e2 = sys.emitters[1];
  const cplx off(sys.coherent_coupling(), -0.5 * sys.dissipative_coupling());
  Eigen::Matrix2cd h;
  h << cplx(e1.detuning, -0.5 * e1.total_decay), off, off, cplx(e2.detuning, -0.5 * e2.total_decay);
  return h;
}

std::array<DecayMode, 2> single_excitation_modes(const SystemParams& sys) {
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> eig(single_excitation_hamiltonian(sys));
  std::array<DecayMode, 2> modes;
  for (int k = 0; k < 2; ++k) {
    modes[static_cast<std::size_t>(k)].eigenvalue = eig.eigenvalues()(k);
    modes[static_cast<std::size_t>(k)].vector = eig.eigenvectors().col(k).normalized();
  }
  if (modes[0].decay_rate() < modes[1].decay_rate()) std::swap(modes[0], modes[1]);
  return modes;
}

Eigen::Vector4cd embed_single_excitation(const Eigen::Vector2cd& amplitudes) {
  Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
  psi(kEG) = amplitudes(0);
  psi(kGE) = amplitudes(1);
  return psi;
}

Operator collective_unitary() {
  const double h = 1.0 / std::sqrt(2.0);
  Operator u = Operator::Zero();
  u(kGG, kCollGG) = 1.0;
  u(kEG, kPlus) = h;
  u(kGE, kPlus) = h;
  u(kEG, kMinus) = h;
  u(kGE, kMinus) = -h;
  u(kEE, kCollEE) = 1.0;
  return u;
}

DensityMatrix to_collective_basis(const DensityMatrix& rho) {
  const Operator u = collective_unitary();
  return u.adjoint() * rho * u;
}

DensityMatrix from_collective_basis(const DensityMatrix& rho_collective) {
  const Operator u = collective_unitary();
  return u * rho_collective * u.adjoint();
}

DensityMatrix basis_state(int index) { return basis_projector(index); }

DensityMatrix pure_state(const Eigen::Vector4cd& psi) {
  const Eigen::Vector4cd n = psi.normalized();
  return n * n.adjoint();
}

DensityMatrix collective_state(CollectiveIndex which) {
  return pure_state(collective_unitary().col(which));
}

void validate_density_matrix(const DensityMatrix& rho, const DensityTolerance& tol) {
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (!(herm <= tol.hermiticity)) {
    std::ostringstream os;
    os << "density matrix not Hermitian (deviation " << herm << ")";
    throw NumericalError(os.str());
  }
  const cplx tr = rho.trace();
  if (!(std::abs(tr - 1.0) <= tol.trace)) {
    std::ostringstream os;
    os << "density matrix trace " << tr.real() << " differs from 1";
    throw NumericalError(os.str());
  }
  const Operator hermitian = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> eig(hermitian, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (!(min_eig >= -tol.eigenvalue)) {
    std::ostringstream os;
    os << "density matrix has negative eigenvalue " << min_eig;
    throw NumericalError(os.str());
  }
}

bool is_valid_density_matrix(const DensityMatrix& rho, const DensityTolerance& tol) {
  try {
    validate_density_matrix(rho, tol);
    return true;
  } catch (const NumericalError&) {
    return false;
  }
}

}  // namespace wgqed

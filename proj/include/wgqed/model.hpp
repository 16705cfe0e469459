#pragma once

// Two-emitter waveguide system: parameters, Hamiltonian, jump channels and
// the Lindblad generator acting on column-vectorized density matrices.
//
// Units: rates and detunings are angular frequencies in rad/ns (a value
// quoted as "X GHz" in 2pi*GHz units is stored as 2*pi*X), times are in ns.
//
// Basis order is {|gg>, |ge>, |eg>, |ee>}; the first letter is emitter 1, so
// |eg> is "emitter 1 excited".

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgqed {

using cplx = std::complex<double>;
using Operator = Eigen::Matrix4cd;
using DensityMatrix = Eigen::Matrix4cd;
using Superoperator = Eigen::Matrix<cplx, 16, 16>;
using VecState = Eigen::Matrix<cplx, 16, 1>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr int kNumEmitters = 2;

/// Converts a frequency quoted in GHz into an angular rate in rad/ns.
constexpr double angular_ghz(double ghz) { return kTwoPi * ghz; }

enum BasisIndex : int { kGG = 0, kGE = 1, kEG = 2, kEE = 3 };

/// Slots of the collective basis {|gg>, |+>, |->, |ee>}.
enum CollectiveIndex : int { kCollGG = 0, kPlus = 1, kMinus = 2, kCollEE = 3 };

/// Raised when a numerical procedure cannot produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmitterParams {
  double total_decay = angular_ghz(0.76);  ///< Gamma_i
  double beta = 0.95;                      ///< fraction of Gamma_i into the guided mode
  double dephasing = 0.0;                  ///< pure dephasing Gamma_d,i
  double detuning = 0.0;                   ///< emitter minus laser frequency

  double waveguide_rate() const { return beta * total_decay; }
  double loss_rate() const { return (1.0 - beta) * total_decay; }
  void validate() const;
};

/// Where the laser sits when a detuning split between the emitters is applied.
enum class LaserReference {
  Symmetric,  ///< Delta1 = c + split/2, Delta2 = c - split/2
  Emitter1,   ///< Delta1 = c, Delta2 = c - split
};

struct SystemParams {
  std::array<EmitterParams, kNumEmitters> emitters{};
  double coupling_phase = 0.0;  ///< phi_12, radians

  double detuning_split() const { return emitters[0].detuning - emitters[1].detuning; }
  double mean_decay() const { return 0.5 * (emitters[0].total_decay + emitters[1].total_decay); }
  /// Gamma_12 = sqrt(g1 g2) cos(phi_12)
  double dissipative_coupling() const;
  /// J_12 = sqrt(g1 g2)/2 sin(phi_12)
  double coherent_coupling() const;
  void validate() const;

  /// Two identical emitters with decay `gamma`, coupling fraction `beta` and zero detuning.
  static SystemParams symmetric(double gamma, double beta);
};

/// Returns a copy whose emitter detunings realize Delta12 = split around `center`.
SystemParams with_detuning_split(SystemParams sys, double split,
                                 LaserReference reference = LaserReference::Symmetric,
                                 double center = 0.0);

enum class DriveMode { CW, Pulsed };

struct EmitterDrive {
  double amplitude = 0.0;  ///< |Omega_m| (rad/ns) for CW, dimensionless weight for pulses
  double phase = 0.0;      ///< theta_m in [0, 2pi)
};

struct GaussianPulse {
  double center = 0.2;    ///< t0, ns
  double fwhm = 0.05;     ///< ns
  double area = std::numbers::pi / 4.0;  ///< integral of the envelope, radians

  double sigma() const;
  /// Normalized envelope scaled so its time integral equals `area`.
  double envelope(double t) const;
  /// Interval outside which the envelope is treated as exactly zero.
  double support_begin() const;
  double support_end() const;
};

struct DriveConfig {
  std::array<EmitterDrive, kNumEmitters> emitters{};
  DriveMode mode = DriveMode::CW;
  GaussianPulse pulse{};

  /// Scale applied to every emitter amplitude at time t (1 for CW).
  double envelope(double t) const;
  /// Complex Rabi amplitude |Omega_m(t)| e^{i theta_m}.
  cplx rabi(int emitter, double t) const;
  bool is_zero() const;
  void validate() const;

  static DriveConfig cw(double amp1, double phase1, double amp2 = 0.0, double phase2 = 0.0);
  static DriveConfig pulsed(const GaussianPulse& pulse, double weight1, double phase1,
                            double weight2, double phase2);
};

/// Wraps an angle into [0, 2pi).
double wrap_phase(double phase);
/// Wraps an angle into (-pi, pi].
double wrap_phase_symmetric(double phase);

// ---------------------------------------------------------------------------
// Operators

/// Lowering operator sigma_i^- of emitter `i` (0-based).
Operator lowering(int emitter);
/// sigma_i^+ sigma_i^-
Operator excited_projector(int emitter);
Operator basis_projector(int index);

/// Waveguide field operator E = sum_i sqrt(g_i) e^{i phi_i} sigma_i^-, phi_1 = 0, phi_2 = phi_12.
Operator waveguide_field(const SystemParams& sys);

Operator build_hamiltonian(const SystemParams& sys, const DriveConfig& drive, double t);

enum class ChannelKind { Waveguide, Loss, Dephasing };

struct JumpChannel {
  Operator op;
  double rate = 0.0;
  ChannelKind kind = ChannelKind::Waveguide;
};

/// Collective waveguide channels from the eigendecomposition of
/// [[g1, G12], [G12, g2]], independent loss (1 - beta_i) Gamma_i and
/// pure-dephasing channels with rate 2 Gamma_d,i. Waveguide channels are
/// always returned (possibly with zero rate); the others only when positive.
std::vector<JumpChannel> build_dissipators(const SystemParams& sys);

Superoperator hamiltonian_superoperator(const Operator& h);
Superoperator dissipator_superoperator(const Operator& jump, double rate);
Superoperator build_liouvillian(const SystemParams& sys, const DriveConfig& drive, double t);

/// Liouvillian split L(t) = fixed + envelope(t) * drive_part.
struct LiouvillianParts {
  Superoperator fixed;
  Superoperator drive_part;
};
LiouvillianParts build_liouvillian_parts(const SystemParams& sys, const DriveConfig& drive);

VecState vectorize(const DensityMatrix& rho);
DensityMatrix unvectorize(const VecState& v);

// ---------------------------------------------------------------------------
// Collective picture

struct CollectiveRates {
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
  cplx splitting{};  ///< S = sqrt(G12^2 - Delta12^2)
  double mean_decay = 0.0;

  bool oscillatory() const { return splitting.imag() > 0.0; }
  double oscillation_frequency() const { return splitting.imag(); }
};

CollectiveRates collective_rates(const SystemParams& sys);

/// Non-Hermitian Hamiltonian restricted to the single-excitation block,
/// ordered {|eg>, |ge>}; pure dephasing is not representable here.
Eigen::Matrix2cd single_excitation_hamiltonian(const SystemParams& sys);

struct DecayMode {
  cplx eigenvalue{};          ///< lambda; amplitudes evolve as e^{-i lambda t}
  Eigen::Vector2cd vector{};  ///< unit-norm right eigenvector in {|eg>, |ge>}
  double decay_rate() const { return -2.0 * eigenvalue.imag(); }
  double frequency() const { return eigenvalue.real(); }
};

/// Eigenmodes of the single-excitation block, fastest-decaying first. At
/// Delta12 = 0 and phi12 = 0 these are |+> and |-> with rates Gamma+ and Gamma-.
std::array<DecayMode, 2> single_excitation_modes(const SystemParams& sys);

/// Embeds a single-excitation amplitude vector {|eg>, |ge>} into the 4-level basis.
Eigen::Vector4cd embed_single_excitation(const Eigen::Vector2cd& amplitudes);

/// Unitary whose columns are |gg>, |+>, |->, |ee> written in the bare basis.
Operator collective_unitary();
DensityMatrix to_collective_basis(const DensityMatrix& rho);
DensityMatrix from_collective_basis(const DensityMatrix& rho_collective);

// ---------------------------------------------------------------------------
// States

DensityMatrix basis_state(int index);
DensityMatrix pure_state(const Eigen::Vector4cd& psi);
/// |+> or |-> as a bare-basis density matrix.
DensityMatrix collective_state(CollectiveIndex which);

struct DensityTolerance {
  double hermiticity = 1e-12;
  double trace = 1e-10;
  double eigenvalue = 1e-10;
};

/// Throws NumericalError describing the first violated invariant.
void validate_density_matrix(const DensityMatrix& rho, const DensityTolerance& tol = {});
bool is_valid_density_matrix(const DensityMatrix& rho, const DensityTolerance& tol = {});

}  // namespace wgqed

#include "wgqed/instrument.hpp"

#include "wgqed/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wgqed {

double jitter_sigma_from_fwhm(double fwhm) {
  if (!(fwhm >= 0.0) || !std::isfinite(fwhm)) throw std::invalid_argument("jitter FWHM must be finite and >= 0");
  // Difference of two independent Gaussian timestamps: sqrt(2) times one detector's sigma.
  return fwhm * std::sqrt(2.0) / std::sqrt(8.0 * std::log(2.0));
}

void InstrumentModel::validate() const {
  jitter_sigma_from_fwhm(jitter_fwhm);
  for (double w : diffusion_width)
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("spectral diffusion width must be finite and >= 0");
  if (quadrature_order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  if (!(std::abs(diffusion_correlation) <= 1.0))
    throw std::invalid_argument("diffusion correlation must lie in [-1, 1]");
}

std::vector<double> jitter_convolve(std::span<const double> taus, std::span<const double> values,
                                    double sigma) {
  if (taus.size() != values.size()) throw std::invalid_argument("tau and value arrays differ in length");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("jitter sigma must be finite and >= 0");
  std::vector<double> out(values.begin(), values.end());
  if (sigma == 0.0 || taus.size() < 2) return out;

  const double step = (taus.back() - taus.front()) / static_cast<double>(taus.size() - 1);
  for (std::size_t k = 1; k < taus.size(); ++k)
    if (!(std::abs(taus[k] - taus[k - 1] - step) <= 1e-9 * step))
      throw std::invalid_argument("jitter convolution requires a uniform, increasing tau grid");
  if (step > sigma / 4.0) {
    std::ostringstream os;
    os << "tau step " << step << " ns is too coarse for jitter sigma " << sigma
       << " ns; use a step of at most " << sigma / 4.0 << " ns";
    throw std::invalid_argument(os.str());
  }

  const auto half = static_cast<std::ptrdiff_t>(std::floor(6.0 * sigma / step));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double norm = 0.0;
  for (std::ptrdiff_t k = -half; k <= half; ++k) {
    const double x = static_cast<double>(k) * step / sigma;
    norm += kernel[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * x * x);
  }
  for (double& w : kernel) w /= norm;

  const auto n = static_cast<std::ptrdiff_t>(values.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const std::ptrdiff_t j = std::clamp(i - k, std::ptrdiff_t{0}, n - 1);
      acc += kernel[static_cast<std::size_t>(k + half)] * values[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  double total = 0.0;
  for (int k = 0; k < order; ++k) {
    rule.nodes.push_back(es.eigenvalues()(k));
    rule.weights.push_back(es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
    total += rule.weights.back();
  }
  for (double& w : rule.weights) w /= total;
  // Symmetric rule: pin the middle node of odd orders to zero.
  if (order % 2 == 1) rule.nodes[static_cast<std::size_t>(order / 2)] = 0.0;
  return rule;
}

std::vector<double> spectral_diffusion_average(const DiffusionObservable& observable,
                                               const InstrumentModel& model, unsigned threads) {
  model.validate();
  const QuadratureRule rule = gauss_hermite(model.quadrature_order);
  const QuadratureRule point{{0.0}, {1.0}};
  const auto& s = model.diffusion_width;
  const QuadratureRule& r1 = s[0] > 0.0 ? rule : point;
  const QuadratureRule& r2 = s[1] > 0.0 ? rule : point;
  const double rho = s[0] > 0.0 ? model.diffusion_correlation : 0.0;
  const std::size_t n1 = r1.nodes.size(), n2 = r2.nodes.size();

  std::vector<std::vector<double>> results(n1 * n2);
  std::vector<std::string> errors(n1 * n2);
  parallel_for(n1 * n2, threads, [&](std::size_t k) {
    const std::size_t i = k / n2, j = k % n2;
    const double d1 = s[0] * r1.nodes[i];
    const double d2 = s[1] * (rho * r1.nodes[i] + std::sqrt(1.0 - rho * rho) * r2.nodes[j]);
    std::ostringstream where;
    where << "quadrature node (" << i << ", " << j << ") at offsets (" << d1 << ", " << d2 << ") rad/ns";
    try {
      results[k] = observable(d1, d2);
      for (double v : results[k])
        if (!std::isfinite(v)) throw NumericalError("observable is not finite");
    } catch (const std::exception& e) {
      errors[k] = where.str() + ": " + e.what();
    }
  });

  std::vector<double> mean;
  for (std::size_t k = 0; k < n1 * n2; ++k) {
    if (!errors[k].empty()) throw NumericalError(errors[k]);
    const double w = r1.weights[k / n2] * r2.weights[k % n2];
    if (mean.empty()) mean.assign(results[k].size(), 0.0);
    if (results[k].size() != mean.size()) throw std::invalid_argument("observable changed length between nodes");
    for (std::size_t m = 0; m < mean.size(); ++m) mean[m] += w * results[k][m];
  }
  return mean;
}

namespace {

SystemParams with_offsets(SystemParams sys, double d1, double d2) {
  sys.emitters[0].detuning += d1;
  sys.emitters[1].detuning += d2;
  return sys;
}

}  // namespace

CorrelationTrace diffusion_averaged_g2(const SystemParams& sys, const DriveConfig& drive,
                                       std::span<const double> taus, const InstrumentModel& model,
                                       unsigned threads) {
  sys.validate();
  drive.validate();
  const std::vector<double> grid(taus.begin(), taus.end());
  // [I, G2(tau_0), G2(tau_1), ...]
  auto observable = [&](double d1, double d2) {
    const CorrelationTrace t = g2_regression(with_offsets(sys, d1, d2), drive, grid);
    std::vector<double> v{t.intensity};
    v.insert(v.end(), t.G2.begin(), t.G2.end());
    return v;
  };
  const std::vector<double> mean = spectral_diffusion_average(observable, model, threads);

  CorrelationTrace out;
  out.taus = grid;
  out.intensity = mean[0];
  out.G2.assign(mean.begin() + 1, mean.end());
  for (double g : out.G2) out.g2.push_back(g / (out.intensity * out.intensity));
  return out;
}

ObservedG2 observed_g2(const SystemParams& sys, const DriveConfig& drive,
                       std::span<const double> taus, const InstrumentModel& model,
                       unsigned threads) {
  model.validate();
  ObservedG2 out;
  out.jitter_sigma = model.jitter_sigma();
  out.ideal = g2_regression(sys, drive, taus);
  out.averaged = diffusion_averaged_g2(sys, drive, taus, model, threads);
  out.observed = jitter_convolve(taus, out.averaged.g2, out.jitter_sigma);
  return out;
}

DetuningMap g2_map_diffusion(const SystemParams& sys, const DriveConfig& drive,
                             std::span<const double> delta1, std::span<const double> delta2,
                             unsigned threads) {
  for (double d : delta1)
    if (!std::isfinite(d)) throw std::invalid_argument("detuning grid contains non-finite values");
  for (double d : delta2)
    if (!std::isfinite(d)) throw std::invalid_argument("detuning grid contains non-finite values");

  DetuningMap map;
  map.delta1.assign(delta1.begin(), delta1.end());
  map.delta2.assign(delta2.begin(), delta2.end());
  const std::size_t n2 = delta2.size();
  map.values.assign(delta1.size() * n2, std::nan(""));
  std::vector<std::string> errors(map.values.size());

  parallel_for(map.values.size(), threads, [&](std::size_t k) {
    try {
      SystemParams s = sys;
      s.emitters[0].detuning = delta1[k / n2];
      s.emitters[1].detuning = delta2[k % n2];
      map.values[k] = g2_zero(s, drive);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < errors.size(); ++k)
    if (!errors[k].empty()) map.failures.push_back({k / n2, k % n2, errors[k]});
  return map;
}

}  // namespace wgqed

#include "wgqed/analysis.hpp"

#include "wgqed/instrument.hpp"
#include "wgqed/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace wgqed {

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double base_model(ModelKind kind, double x, std::span<const double> p) {
  switch (kind) {
    case ModelKind::BroadenedDip:
      return model_broadened_dip(x, p[0], p[1], p[2], p[3]);
    case ModelKind::TwoSidedExp:
      return model_two_sided_exp(x, p[0], p[1], p[2]);
    case ModelKind::Rabi:
      return model_rabi(x, p[0], p[1], p[2]);
  }
  return 0.0;
}

std::vector<double> residuals(const FitModel& model, const FitData& data, std::span<const double> p) {
  std::vector<double> r = model.evaluate(data.x, p);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] -= data.y[i];
    if (!data.error.empty()) r[i] /= data.error[i];
  }
  return r;
}

double sum_squares(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

}  // namespace

double model_broadened_dip(double tau, double amplitude, double gamma_minus, double gamma_d,
                           double omega) {
  const double t = std::abs(tau);
  const double q = 0.25 * (gamma_minus - 2.0 * gamma_d);
  const double mu = kTwoPi * std::sqrt(omega * omega + q * q);
  const double eta = kTwoPi * 0.25 * (3.0 * gamma_minus + 2.0 * gamma_d);
  // (eta/mu) sin(mu t) written as eta t sinc(mu t) so mu -> 0 is continuous.
  return 1.0 - amplitude * std::exp(-eta * t) * (std::cos(mu * t) + eta * t * sinc(mu * t));
}

double model_two_sided_exp(double tau, double baseline, double height, double gamma_adip) {
  return baseline + height * std::exp(-kTwoPi * gamma_adip * std::abs(tau));
}

double model_rabi(double power, double eta, double amplitude, double offset) {
  const double s = std::sin(eta * std::sqrt(std::max(power, 0.0)));
  return offset + amplitude * s * s;
}

double rabi_pi_power(double eta) {
  const double r = std::numbers::pi / (2.0 * eta);
  return r * r;
}

FitModel FitModel::broadened_dip(double amplitude, double gamma_minus, double gamma_d, double omega,
                                 double sigma) {
  FitModel m;
  m.kind = ModelKind::BroadenedDip;
  m.params = {{"A", "", amplitude, -10.0, 10.0, false},
              {"Gamma_minus", "GHz", gamma_minus, 1e-6, 100.0, false},
              {"Gamma_d", "GHz", gamma_d, 0.0, 100.0, false},
              {"Omega", "GHz", omega, 0.0, 100.0, true}};
  m.instrument_sigma = sigma;
  return m;
}

FitModel FitModel::two_sided_exp(double baseline, double height, double gamma_adip, double sigma) {
  FitModel m;
  m.kind = ModelKind::TwoSidedExp;
  m.params = {{"baseline", "", baseline, -100.0, 100.0, false},
              {"height", "", height, -100.0, 100.0, false},
              {"Gamma_adip", "GHz", gamma_adip, 1e-6, 100.0, false}};
  m.instrument_sigma = sigma;
  return m;
}

FitModel FitModel::rabi(double eta, double amplitude, double offset) {
  FitModel m;
  m.kind = ModelKind::Rabi;
  m.params = {{"eta_exc", "mW^-1/2", eta, 1e-9, 1e3, false},
              {"amplitude", "", amplitude, -1e12, 1e12, false},
              {"offset", "", offset, -1e12, 1e12, false}};
  return m;
}

void FitModel::validate() const {
  const std::size_t expected = kind == ModelKind::BroadenedDip ? 4 : 3;
  if (params.size() != expected) throw std::invalid_argument("fit model has the wrong number of parameters");
  for (const auto& p : params) {
    if (!(p.lower < p.upper)) throw std::invalid_argument("parameter " + p.name + " has lower >= upper");
    if (!(p.value >= p.lower && p.value <= p.upper))
      throw std::invalid_argument("initial value of " + p.name + " lies outside its bounds");
  }
  if (!(instrument_sigma >= 0.0) || !std::isfinite(instrument_sigma))
    throw std::invalid_argument("instrument sigma must be finite and >= 0");
  if (instrument_sigma > 0.0 && kind == ModelKind::Rabi)
    throw std::invalid_argument("instrument convolution applies to delay-axis models only");
}

std::vector<double> FitModel::initial_values() const {
  std::vector<double> v;
  for (const auto& p : params) v.push_back(p.value);
  return v;
}

std::size_t FitModel::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < params.size(); ++k)
    if (params[k].name == name) return k;
  throw std::out_of_range("no fit parameter named " + name);
}

std::vector<double> FitModel::evaluate(std::span<const double> x, std::span<const double> p) const {
  std::vector<double> out(x.size());
  if (instrument_sigma == 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = base_model(kind, x[i] - instrument_center, p);
    return out;
  }
  if (x.empty()) return out;

  // Oversample 4x relative to the finest data spacing, pad by the kernel reach.
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  double spacing = instrument_sigma;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] > sorted[i - 1]) spacing = std::min(spacing, sorted[i] - sorted[i - 1]);
  const double step_target = std::min(spacing, instrument_sigma) / 4.0;
  const double lo = sorted.front() - 6.5 * instrument_sigma;
  const double hi = sorted.back() + 6.5 * instrument_sigma;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step_target)) + 1;
  const double step = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> grid(n), fine(n);
  for (std::size_t k = 0; k < n; ++k) {
    grid[k] = lo + static_cast<double>(k) * step;
    fine[k] = base_model(kind, grid[k] - instrument_center, p);
  }
  const std::vector<double> conv = jitter_convolve(grid, fine, instrument_sigma);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = (x[i] - lo) / step;
    const auto k = std::min(static_cast<std::size_t>(std::floor(u)), n - 2);
    const double f = u - static_cast<double>(k);
    out[i] = (1.0 - f) * conv[k] + f * conv[k + 1];
  }
  return out;
}

double FitResult::value(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return values[k];
  throw std::out_of_range("no fit parameter named " + name);
}

double FitResult::uncertainty(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return uncertainties[k];
  throw std::out_of_range("no fit parameter named " + name);
}

double residual_norm(const FitModel& model, const FitData& data, std::span<const double> p) {
  return std::sqrt(sum_squares(residuals(model, data, p)));
}

FitModel with_values(FitModel model, const FitResult& result) {
  for (std::size_t k = 0; k < model.params.size(); ++k) model.params[k].value = result.values[k];
  return model;
}

FitResult fit(const FitModel& model, const FitData& data, const FitOptions& options) {
  model.validate();
  if (data.x.size() != data.y.size() || (!data.error.empty() && data.error.size() != data.y.size()))
    throw std::invalid_argument("fit data columns differ in length");
  for (double e : data.error)
    if (!(e > 0.0)) throw std::invalid_argument("fit data errors must be positive");

  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < model.params.size(); ++k)
    if (!model.params[k].fixed) free.push_back(k);
  const std::size_t nf = free.size();
  if (data.y.size() < nf + 2) {
    std::ostringstream os;
    os << "fit needs at least " << nf + 2 << " samples for " << nf << " free parameters, got "
       << data.y.size();
    throw std::invalid_argument(os.str());
  }

  std::vector<double> p = model.initial_values();
  const std::size_t m = data.y.size();

  auto jacobian = [&](const std::vector<double>& at, const std::vector<double>& r0) {
    Eigen::MatrixXd jac(m, nf);
    for (std::size_t c = 0; c < nf; ++c) {
      const std::size_t k = free[c];
      const auto& par = model.params[k];
      const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(std::abs(at[k]), 1e-3);
      std::vector<double> plus = at, minus = at;
      plus[k] = std::min(at[k] + h, par.upper);
      minus[k] = std::max(at[k] - h, par.lower);
      const auto rp = plus[k] == at[k] ? r0 : residuals(model, data, plus);
      const auto rm = minus[k] == at[k] ? r0 : residuals(model, data, minus);
      const double span = plus[k] - minus[k];
      for (std::size_t i = 0; i < m; ++i) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (rp[i] - rm[i]) / span;
    }
    return jac;
  };

  auto check_rank = [&](const Eigen::MatrixXd& jac) {
    Eigen::VectorXd norms = jac.colwise().norm();
    Eigen::MatrixXd scaled = jac;
    std::vector<std::string> degenerate;
    for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
      if (!(norms(c) > 0.0)) degenerate.push_back(model.params[free[static_cast<std::size_t>(c)]].name);
      else scaled.col(c) /= norms(c);
    }
    if (degenerate.empty() && nf > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      if (sv(sv.size() - 1) <= 1e-10 * sv(0)) {
        const Eigen::VectorXd null = svd.matrixV().col(sv.size() - 1);
        for (Eigen::Index c = 0; c < null.size(); ++c)
          if (std::abs(null(c)) > 0.2) degenerate.push_back(model.params[free[static_cast<std::size_t>(c)]].name);
      }
    }
    if (!degenerate.empty()) {
      std::string names;
      for (const auto& d : degenerate) names += (names.empty() ? "" : ", ") + d;
      throw NumericalError("singular Jacobian: degenerate parameters " + names);
    }
  };

  FitResult result;
  for (const auto& par : model.params) result.names.push_back(par.name);

  std::vector<double> r = residuals(model, data, p);
  double cost = sum_squares(r);
  if (!std::isfinite(cost)) throw NumericalError("model is not finite at the initial guess");
  Eigen::MatrixXd jac = jacobian(p, r);
  check_rank(jac);

  auto projected_gradient = [&](const Eigen::VectorXd& g) {
    double worst = 0.0;
    for (std::size_t c = 0; c < nf; ++c) {
      const auto& par = model.params[free[c]];
      const double gc = g(static_cast<Eigen::Index>(c));
      // Components pushing into an active bound do not count.
      if ((p[free[c]] <= par.lower && gc > 0.0) || (p[free[c]] >= par.upper && gc < 0.0)) continue;
      worst = std::max(worst, std::abs(gc));
    }
    return worst;
  };

  double lambda = -1.0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(m));
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * rv;
    if (projected_gradient(g) < options.gradient_tolerance || cost == 0.0) {
      result.converged = true;
      result.message = "gradient below tolerance";
      break;
    }
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12 * jtj.diagonal().maxCoeff());
    if (lambda < 0.0) lambda = 1e-3;

    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::VectorXd delta = a.ldlt().solve(-g);
      std::vector<double> trial = p;
      for (std::size_t c = 0; c < nf; ++c) {
        const auto& par = model.params[free[c]];
        trial[free[c]] = std::clamp(p[free[c]] + delta(static_cast<Eigen::Index>(c)), par.lower, par.upper);
      }
      const auto rt = residuals(model, data, trial);
      const double ct = sum_squares(rt);
      if (std::isfinite(ct) && ct < cost) {
        const double reduction = (cost - ct) / cost;
        p = trial;
        r = rt;
        cost = ct;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (reduction < options.relative_reduction) {
          result.converged = true;
          result.message = "relative reduction below tolerance";
        }
      } else {
        lambda *= 4.0;
      }
    }
    if (result.converged) break;
    if (!accepted) {
      // No downhill step at any damping: the point is a minimum to working precision.
      result.converged = true;
      result.message = "no further decrease possible";
      break;
    }
    jac = jacobian(p, r);
  }
  if (!result.converged) result.message = "iteration limit reached";

  jac = jacobian(p, r);
  check_rank(jac);
  const double dof = static_cast<double>(m - nf);
  result.values = p;
  result.residual_norm = std::sqrt(cost);
  result.reduced_chi2 = cost / dof;
  result.uncertainties.assign(p.size(), 0.0);
  const Eigen::MatrixXd cov = (jac.transpose() * jac).inverse() * result.reduced_chi2;
  for (std::size_t c = 0; c < nf; ++c)
    result.uncertainties[free[c]] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c))));
  return result;
}

WindowedFit fit_windows(const FitData& trace, const FitModel& dip, const FitModel& antidip,
                        double split, const FitOptions& options) {
  FitData outer, inner;
  for (std::size_t i = 0; i < trace.x.size(); ++i) {
    FitData& target = std::abs(trace.x[i]) >= split ? outer : inner;
    target.x.push_back(trace.x[i]);
    target.y.push_back(trace.y[i]);
    if (!trace.error.empty()) target.error.push_back(trace.error[i]);
    // the split point itself belongs to both windows
    if (std::abs(trace.x[i]) == split) {
      inner.x.push_back(trace.x[i]);
      inner.y.push_back(trace.y[i]);
      if (!trace.error.empty()) inner.error.push_back(trace.error[i]);
    }
  }
  return {fit(dip, outer, options), fit(antidip, inner, options)};
}

FitData read_fit_csv(std::istream& in) {
  FitData data;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  bool has_error = false;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!header_seen) {
      if (cells.size() < 2 || (cells[0] != "tau_ns" && cells[0] != "power_mw") || cells[1].empty())
        fail("expected header tau_ns,<value>[,error] or power_mw,<value>[,error]");
      if (cells.size() > 3 || (cells.size() == 3 && cells[2] != "error"))
        fail("unexpected header columns; only an optional third column 'error' is allowed");
      has_error = cells.size() == 3;
      header_seen = true;
      continue;
    }
    if (cells.size() != (has_error ? 3u : 2u)) fail("wrong number of columns");
    double v[3] = {0, 0, 0};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::size_t used = 0;
      try {
        v[c] = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[c].size() || !std::isfinite(v[c])) fail("not a finite number: '" + cells[c] + "'");
    }
    if (has_error && !(v[2] > 0.0)) fail("error column must be positive");
    data.x.push_back(v[0]);
    data.y.push_back(v[1]);
    if (has_error) data.error.push_back(v[2]);
  }
  if (!header_seen) throw std::invalid_argument("line " + std::to_string(line_no) + ": missing header");
  return data;
}

FitData read_fit_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return read_fit_csv(in);
}

std::string format_fit_report(const FitModel& model, const FitResult& result) {
  std::ostringstream os;
  const char* kind = model.kind == ModelKind::BroadenedDip  ? "broadened_dip"
                     : model.kind == ModelKind::TwoSidedExp ? "two_sided_exp"
                                                            : "rabi";
  os << "model: " << kind << "\n";
  if (model.instrument_sigma > 0.0) os << "instrument sigma: " << model.instrument_sigma << " ns\n";
  os << "converged: " << (result.converged ? "yes" : "no") << " (" << result.message << ", "
     << result.iterations << " iterations)\n";
  os << std::setprecision(6);
  os << "residual norm: " << result.residual_norm << "\nreduced chi2: " << result.reduced_chi2 << "\n";
  os << std::left << std::setw(14) << "parameter" << std::setw(16) << "value" << std::setw(16)
     << "uncertainty" << "unit\n";
  for (std::size_t k = 0; k < model.params.size(); ++k) {
    os << std::setw(14) << model.params[k].name << std::setw(16) << result.values[k] << std::setw(16);
    if (model.params[k].fixed) os << "fixed";
    else os << result.uncertainties[k];
    os << model.params[k].unit << "\n";
  }
  if (model.kind == ModelKind::Rabi) {
    const double eta = result.values[0];
    os << std::setw(14) << "P_pi" << std::setw(16) << rabi_pi_power(eta) << std::setw(16)
       << 2.0 * rabi_pi_power(eta) * result.uncertainties[0] / eta << "mW\n";
  }
  return os.str();
}

}  // namespace wgqed

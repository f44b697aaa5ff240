#include "mpamp/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mpamp/errors.hpp"
#include "mpamp/quadrature.hpp"

namespace mpamp {

Prior Prior::bernoulli_gaussian(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    std::ostringstream os;
    os << "Bernoulli-Gaussian sparsity rate must lie in (0, 1], got " << rho;
    throw InvalidArgument(os.str());
  }
  std::vector<GaussianComponent> comps;
  if (rho < 1.0) comps.push_back({1.0 - rho, 0.0, 0.0});
  comps.push_back({rho, 0.0, 1.0});
  return Prior(PriorKind::bernoulli_gaussian, rho, std::move(comps));
}

Prior Prior::gaussian_mixture(std::vector<double> weights, std::vector<double> means,
                              std::vector<double> variances) {
  if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
    throw InvalidArgument("Gaussian mixture needs equally sized, nonempty weights/means/variances");
  }
  double total = 0.0;
  std::vector<GaussianComponent> comps;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] >= 0.0)) throw InvalidArgument("mixture weights must be nonnegative");
    if (!(variances[k] > 0.0)) throw InvalidArgument("mixture variances must be positive");
    total += weights[k];
    if (weights[k] > 0.0) comps.push_back({weights[k], means[k], variances[k]});
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "mixture weights must sum to 1 within 1e-12, got " << total;
    throw InvalidArgument(os.str());
  }
  return Prior(PriorKind::gaussian_mixture, 0.0, std::move(comps));
}

double Prior::mean() const noexcept {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double Prior::second_moment() const noexcept {
  double m2 = 0.0;
  for (const auto& c : components_) m2 += c.weight * (c.mean * c.mean + c.variance);
  return m2;
}

double Prior::variance() const noexcept {
  const double m = mean();
  return second_moment() - m * m;
}

std::vector<GaussianComponent> Prior::scaled(double scale) const {
  std::vector<GaussianComponent> out;
  out.reserve(components_.size());
  for (const auto& c : components_) out.push_back({c.weight, scale * c.mean, scale * scale * c.variance});
  return out;
}

double Prior::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  if (kind_ == PriorKind::bernoulli_gaussian) {
    const bool active = u(rng) < rho_;
    const double z = g(rng);
    return active ? z : 0.0;
  }
  double pick = u(rng);
  const GaussianComponent* chosen = &components_.back();
  for (const auto& c : components_) {
    if (pick < c.weight) {
      chosen = &c;
      break;
    }
    pick -= c.weight;
  }
  return chosen->mean + std::sqrt(chosen->variance) * g(rng);
}

double second_moment(const Prior& prior) { return prior.second_moment(); }

namespace {

void require_positive_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    std::ostringstream os;
    os << "scalar channel variance must be positive and finite, got " << sigma2;
    throw InvalidArgument(os.str());
  }
}

// Per-component posterior quantities, weights normalized in the log domain.
struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

template <std::size_t Small = 8>
Posterior posterior(std::span<const GaussianComponent> comps, double f, double sigma2) {
  double logw_buf[Small];
  double m_buf[Small];
  double c_buf[Small];
  std::vector<double> heap;
  double* logw = logw_buf;
  double* m = m_buf;
  double* c = c_buf;
  const std::size_t k = comps.size();
  if (k > Small) {
    heap.resize(3 * k);
    logw = heap.data();
    m = logw + k;
    c = m + k;
  }
  double max_logw = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& comp = comps[i];
    const double v = comp.variance + sigma2;
    const double d = f - comp.mean;
    logw[i] = std::log(comp.weight) - 0.5 * std::log(v) - 0.5 * d * d / v;
    m[i] = comp.mean + comp.variance / v * d;
    c[i] = comp.variance * sigma2 / v;
    max_logw = std::max(max_logw, logw[i]);
  }
  double z = 0.0;
  double eta = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    logw[i] = std::exp(logw[i] - max_logw);
    z += logw[i];
    eta += logw[i] * m[i];
  }
  eta /= z;
  double var = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dm = m[i] - eta;
    var += logw[i] * (c[i] + dm * dm);
  }
  return {eta, var / z};
}

constexpr double kQuadRelTol = 1e-8;

double component_integral(std::span<const GaussianComponent> comps, const GaussianComponent& comp, double sigma2) {
  const double var_f = comp.variance + sigma2;
  auto g = [&](double f) { return posterior(comps, f, sigma2).variance; };
  const double coarse = quad::gaussian_expectation(g, comp.mean, var_f, 61);
  const double fine = quad::gaussian_expectation(g, comp.mean, var_f, 121);
  if (std::abs(fine - coarse) <= kQuadRelTol * std::abs(fine)) return fine;

  // Sharp posterior transitions (spike-and-slab at small sigma2) defeat the
  // fixed rules; integrate the density-weighted integrand adaptively.
  const double sd = std::sqrt(var_f);
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sd);
  auto h = [&](double f) {
    const double d = (f - comp.mean) / sd;
    return norm * std::exp(-0.5 * d * d) * g(f);
  };
  const double lo = comp.mean - 12.0 * sd;
  const double hi = comp.mean + 12.0 * sd;
  // Split at the mean and at +-sqrt(sigma2) multiples where the posterior switches.
  std::vector<double> cuts{lo, hi, comp.mean};
  const double s = std::sqrt(sigma2);
  for (double k : {-8.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 8.0}) {
    const double x = comp.mean + k * s;
    if (x > lo && x < hi) cuts.push_back(x);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const auto r = quad::adaptive(h, cuts[i], cuts[i + 1], 1e-11, 1e-300);
    total += r.value;
    err += r.error;
  }
  if (err > kQuadRelTol * std::abs(total)) {
    std::ostringstream os;
    os << "denoiser MSE quadrature did not converge (achieved relative error " << err / std::abs(total) << ")";
    throw NumericalError(os.str(), err / std::abs(total));
  }
  return total;
}

}  // namespace

Denoised denoise(const Prior& prior, double f, double sigma2) {
  require_positive_sigma2(sigma2);
  const auto p = posterior(prior.components(), f, sigma2);
  // d/df E[X|f] = Var(X|f) / sigma2 for additive Gaussian noise.
  return {p.mean, p.variance / sigma2};
}

double posterior_variance(const Prior& prior, double f, double sigma2) {
  require_positive_sigma2(sigma2);
  return posterior(prior.components(), f, sigma2).variance;
}

double denoiser_mse(const Prior& prior, double sigma2) {
  require_positive_sigma2(sigma2);
  const auto comps = prior.components();
  double total = 0.0;
  for (const auto& comp : comps) total += comp.weight * component_integral(comps, comp, sigma2);
  return total;
}

double denoiser_mse_slope(const Prior& prior, double sigma2) {
  if (!(sigma2 >= 1e-12)) {
    std::ostringstream os;
    os << "finite-difference step underflows for sigma2 = " << sigma2 << " (< 1e-12)";
    throw InvalidArgument(os.str());
  }
  const double h = 1e-4 * sigma2;
  return (denoiser_mse(prior, sigma2 + h) - denoiser_mse(prior, sigma2 - h)) / (2.0 * h);
}

}  // namespace mpamp

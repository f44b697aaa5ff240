#include "mpamp/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "mpamp/errors.hpp"

namespace mpamp::quad {
namespace {

// Newton iteration on the orthonormal Hermite recurrence (Golub-Welsch
// starting guesses from the classic asymptotic formulas).
HermiteRule build_hermite(std::size_t n) {
  HermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const auto m = (n + 1) / 2;
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[1];
    } else {
      z = 2.0 * z - rule.nodes[i - 2];
    }
    double pp = 0.0;
    int iter = 0;
    for (; iter < 100; ++iter) {
      double p1 = pim4;
      double p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jj = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (jj + 1.0)) * p2 - std::sqrt(jj / (jj + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * static_cast<double>(n)) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    if (iter == 100) throw NumericalError("Gauss-Hermite node iteration did not converge");
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

LegendreRule build_legendre(std::size_t n) {
  LegendreRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const auto m = (n + 1) / 2;
  for (std::size_t i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jj = static_cast<double>(j);
        p1 = ((2.0 * jj + 1.0) * z * p2 - jj * p3) / (jj + 1.0);
      }
      pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

template <class Rule, class Builder>
const Rule& cached(std::size_t n, Builder build) {
  static std::mutex mutex;
  static std::map<std::size_t, Rule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

}  // namespace

const HermiteRule& gauss_hermite(std::size_t n) {
  if (n == 0) throw InvalidArgument("Gauss-Hermite rule needs at least one node");
  return cached<HermiteRule>(n, build_hermite);
}

const LegendreRule& gauss_legendre(std::size_t n) {
  if (n == 0) throw InvalidArgument("Gauss-Legendre rule needs at least one node");
  return cached<LegendreRule>(n, build_legendre);
}

double gaussian_expectation(const std::function<double(double)>& g, double mean, double variance,
                            std::size_t n) {
  const auto& rule = gauss_hermite(n);
  const double scale = std::sqrt(2.0 * variance);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * g(mean + scale * rule.nodes[i]);
  return acc / std::sqrt(std::numbers::pi);
}

AdaptiveResult adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                        double abs_tol, unsigned max_depth) {
  AdaptiveResult out;
  double l1 = 0.0;
  out.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol,
                                                                              &out.error, &l1);
  out.converged = out.error <= std::max(abs_tol, rel_tol * std::abs(out.value)) || out.error <= rel_tol * l1;
  return out;
}

}  // namespace mpamp::quad

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mpamp::quad {

// Gauss-Hermite rule for integrals of the form  ∫ exp(-z²) g(z) dz.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Rules are computed once per size and cached; thread-safe.
const HermiteRule& gauss_hermite(std::size_t n);

// E[g(Y)] for Y ~ N(mean, variance) using an n-point Gauss-Hermite rule.
double gaussian_expectation(const std::function<double(double)>& g, double mean, double variance,
                            std::size_t n);

struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
};

// Adaptive Gauss-Kronrod (15-point) on [a, b] until the error estimate is
// below max(abs_tol, rel_tol * |value|) or the bisection depth is exhausted.
// Callers decide how to treat non-convergence.
AdaptiveResult adaptive(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, double abs_tol = 0.0, unsigned max_depth = 15);

// Fixed Gauss-Legendre rule on [-1, 1].
struct LegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const LegendreRule& gauss_legendre(std::size_t n);

}  // namespace mpamp::quad

#include <doctest.h>

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <random>

#include "mpamp/errors.hpp"
#include "mpamp/rng.hpp"
#include "mpamp/signal_model.hpp"

using namespace mpamp;

namespace {

Prior mixture() { return Prior::gaussian_mixture({0.5, 0.3, 0.2}, {0.0, -1.5, 2.0}, {0.1, 0.8, 1.0}); }

// Monte Carlo oracle: mean and standard error of (eta(X + W) - X)^2.
std::pair<double, double> mc_mse(const Prior& prior, double sigma2, std::size_t n, std::uint64_t seed) {
  auto rng = make_stream(seed, {});
  boost::random::normal_distribution<double> w(0.0, std::sqrt(sigma2));
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = prior.sample(rng);
    const double e = denoise(prior, x + w(rng), sigma2).estimate - x;
    s += e * e;
    s2 += e * e * e * e;
  }
  const double mean = s / n;
  return {mean, std::sqrt((s2 / n - mean * mean) / n)};
}

}  // namespace

TEST_SUITE("signal_model") {
  TEST_CASE("gaussian prior has closed-form posterior mean and MMSE") {
    const auto g = Prior::bernoulli_gaussian(1.0);
    for (double s2 : {0.01, 0.3, 1.0, 5.0}) {
      CHECK(denoiser_mse(g, s2) == doctest::Approx(s2 / (1 + s2)).epsilon(1e-10));
      const auto d = denoise(g, 0.8, s2);
      CHECK(d.estimate == doctest::Approx(0.8 / (1 + s2)).epsilon(1e-12));
      CHECK(d.derivative == doctest::Approx(1 / (1 + s2)).epsilon(1e-12));
      CHECK(denoiser_mse_slope(g, s2) == doctest::Approx(1 / ((1 + s2) * (1 + s2))).epsilon(1e-6));
    }
  }

  TEST_CASE("denoiser MSE agrees with Monte Carlo") {
    for (const auto& prior : {Prior::bernoulli_gaussian(0.1), mixture()}) {
      for (double s2 : {0.005, 0.1, 1.0}) {
        const auto [mean, se] = mc_mse(prior, s2, 200'000, 42);
        CHECK(std::abs(denoiser_mse(prior, s2) - mean) < 4 * se);
      }
    }
  }

  TEST_CASE("denoiser derivative matches finite differences and posterior variance") {
    const auto prior = Prior::bernoulli_gaussian(0.1);
    for (double f : {-0.9, 0.0, 0.05, 0.3, 2.0}) {
      const double s2 = 0.02, h = 1e-6;
      const double fd = (denoise(prior, f + h, s2).estimate - denoise(prior, f - h, s2).estimate) / (2 * h);
      const auto d = denoise(prior, f, s2);
      CHECK(d.derivative == doctest::Approx(fd).epsilon(1e-6));
      CHECK(posterior_variance(prior, f, s2) == doctest::Approx(s2 * d.derivative).epsilon(1e-10));
    }
  }

  TEST_CASE("MSE slope matches a coarser finite difference") {
    const auto prior = mixture();
    const double s2 = 0.3, h = 1e-3 * s2;
    const double fd = (denoiser_mse(prior, s2 + h) - denoiser_mse(prior, s2 - h)) / (2 * h);
    CHECK(denoiser_mse_slope(prior, s2) == doctest::Approx(fd).epsilon(1e-5));
  }

  TEST_CASE("MSE is increasing and bounded by the prior variance") {
    const auto prior = Prior::bernoulli_gaussian(0.2);
    double prev = 0.0;
    for (double s2 = 1e-4; s2 < 100; s2 *= 1.7) {
      const double m = denoiser_mse(prior, s2);
      CHECK(m > prev);
      CHECK(m <= prior.variance() + 1e-15);
      CHECK(m <= s2);
      prev = m;
    }
  }

  TEST_CASE("sampling reproduces the prior moments") {
    auto rng = make_stream(9, {});
    const auto prior = mixture();
    const std::size_t n = 400'000;
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = prior.sample(rng);
      s += x;
      s2 += x * x;
    }
    CHECK(s / n == doctest::Approx(prior.mean()).epsilon(0.02));
    CHECK(s2 / n == doctest::Approx(prior.second_moment()).epsilon(0.01));
    CHECK(prior.mean() == doctest::Approx(0.5 * 0 + 0.3 * -1.5 + 0.2 * 2.0));
    CHECK(second_moment(Prior::bernoulli_gaussian(0.1)) == doctest::Approx(0.1));
  }

  TEST_CASE("invalid priors are rejected") {
    CHECK_THROWS_AS(Prior::bernoulli_gaussian(0.0), InvalidArgument);
    CHECK_THROWS_AS(Prior::bernoulli_gaussian(1.5), InvalidArgument);
    CHECK_THROWS_AS(Prior::gaussian_mixture({0.5, 0.4}, {0, 1}, {1, 1}), InvalidArgument);
    CHECK_THROWS_AS(Prior::gaussian_mixture({0.5, 0.5}, {0, 1}, {1, 0}), InvalidArgument);
    CHECK_THROWS_AS(denoiser_mse_slope(Prior::bernoulli_gaussian(0.1), 0.0), InvalidArgument);
  }
}

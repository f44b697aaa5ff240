#include <doctest.h>

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "mpamp/errors.hpp"
#include "mpamp/rate_distortion.hpp"
#include "mpamp/rng.hpp"

using namespace mpamp;

namespace {

struct MonteCarloQuantizer {
  double rate = 0.0;
  double distortion = 0.0;
  double distortion_se = 0.0;
};

// Samples x/P + w directly, quantizes with midpoint reconstruction and
// measures the plug-in entropy of the bin indices.
MonteCarloQuantizer mc_quantizer(const Prior& prior, double sigma2, int P, double gamma, std::size_t n) {
  auto rng = make_stream(5, {});
  boost::random::normal_distribution<double> w(0.0, std::sqrt(sigma2 / P));
  std::map<long long, std::size_t> hist;
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = prior.sample(rng) / P + w(rng);
    const auto k = std::llround(f / gamma);
    const double e = gamma * static_cast<double>(k) - f;
    s += e * e;
    s2 += e * e * e * e;
    ++hist[k];
  }
  MonteCarloQuantizer out;
  for (const auto& [k, c] : hist) {
    const double p = static_cast<double>(c) / n;
    out.rate -= p * std::log2(p);
  }
  out.distortion = s / n;
  out.distortion_se = std::sqrt((s2 / n - out.distortion * out.distortion) / n);
  return out;
}

}  // namespace

TEST_SUITE("rate_distortion") {
  TEST_CASE("node source moments") {
    const auto prior = Prior::bernoulli_gaussian(0.1);
    const auto src = node_source(prior, 0.04, 100);
    CHECK(src.mean() == doctest::Approx(0.0));
    CHECK(src.variance() == doctest::Approx(0.1 / 1e4 + 0.04 / 100).epsilon(1e-12));
    const auto norm = normalized_node_source(prior, 0.04, 100);
    CHECK(norm.variance() == doctest::Approx(src.variance() * 100 / 0.04).epsilon(1e-12));
  }

  TEST_CASE("Blahut-Arimoto recovers the gaussian rate-distortion function") {
    const std::size_t n = 241;
    std::vector<double> xs(n), pmf(n), dist(n * n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = -6.0 + 12.0 * i / (n - 1);
      pmf[i] = std::exp(-0.5 * xs[i] * xs[i]);
      total += pmf[i];
    }
    for (auto& p : pmf) p /= total;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = (xs[i] - xs[j]) * (xs[i] - xs[j]);
    for (double s : {-1.0, -2.5, -6.0}) {
      const auto r = blahut_arimoto(pmf, dist, n, s);
      // Gaussian: D = 1/(-2s) and R = 0.5 log2(1/D)
      CHECK(r.distortion == doctest::Approx(-0.5 / s).epsilon(0.01));
      CHECK(r.rate == doctest::Approx(0.5 * std::log2(1.0 / r.distortion)).epsilon(0.01));
    }
  }

  TEST_CASE("rate-distortion curve of a gaussian node source is exact") {
    const auto prior = Prior::bernoulli_gaussian(1.0);
    const double sigma2 = 0.05;
    const int P = 100;
    const auto curve = build_rd_curve(prior, sigma2, P, RdOptions{});
    const double var = node_source(prior, sigma2, P).variance();
    for (double frac : {0.9, 0.5, 0.1, 1e-3, 1e-6}) {
      const double D = frac * var;
      CHECK(curve.rate_for_distortion(D) == doctest::Approx(0.5 * std::log2(1.0 / frac)).epsilon(5e-3));
    }
  }

  TEST_CASE("ECSQ rate and distortion agree with Monte Carlo") {
    const auto prior = Prior::bernoulli_gaussian(0.1);
    const double sigma2 = 0.05;
    const int P = 100;
    const auto src = node_source(prior, sigma2, P);
    for (double gamma : {0.5 * std::sqrt(sigma2 / P), 1.5 * std::sqrt(sigma2 / P)}) {
      const auto pt = ecsq_point(src, {gamma, Reconstruction::midpoint});
      const auto mc = mc_quantizer(prior, sigma2, P, gamma, 400'000);
      CHECK(std::abs(pt.distortion - mc.distortion) < 4 * mc.distortion_se);
      CHECK(pt.rate == doctest::Approx(mc.rate).epsilon(0.005));
    }
  }

  TEST_CASE("fine ECSQ approaches the uniform-noise model") {
    const auto src = node_source(Prior::bernoulli_gaussian(1.0), 1.0, 1);
    const double gamma = 0.01;
    const auto pt = ecsq_point(src, {gamma, Reconstruction::midpoint});
    CHECK(pt.distortion == doctest::Approx(gamma * gamma / 12).epsilon(1e-4));
    CHECK(pt.rate == doctest::Approx(src.entropy_bits() - std::log2(gamma)).epsilon(1e-4));
    // Gap to R(D) of the gaussian: 0.5 log2(2 pi e / 12)
    const double gap = pt.rate - 0.5 * std::log2(src.variance() / pt.distortion);
    CHECK(gap == doctest::Approx(0.5 * std::log2(2 * std::numbers::pi * std::numbers::e / 12)).epsilon(1e-3));
  }

  TEST_CASE("high-rate gaussian model is self-inverse") {
    for (double R : {0.0, 1.0, 4.5}) {
      const double D = gaussian_highrate_distortion(R, 2.0);
      CHECK(gaussian_highrate_rate(D, 2.0) == doctest::Approx(R));
    }
    CHECK_THROWS_AS(gaussian_highrate_rate(3.0, 2.0), InvalidArgument);
  }

  TEST_CASE("bin admissibility boundary") {
    CHECK(bin_size_admissible(0.019, 0.01, 100));
    CHECK_FALSE(bin_size_admissible(0.021, 0.01, 100));
  }

  TEST_CASE("RdCurve drops non-monotone points and interpolates consistently") {
    RdCurve c({{0.0, 1.0}, {1.0, 0.25}, {1.5, 0.3}, {2.0, 0.0625}});
    CHECK(c.knots().size() == 3);
    CHECK(c.distortion_for_rate(1.0) == doctest::Approx(0.25));
    for (double R : {0.3, 1.2, 1.9}) CHECK(c.rate_for_distortion(c.distortion_for_rate(R)) == doctest::Approx(R));
    CHECK_THROWS(c.distortion_for_rate(2.5));
    std::ostringstream os;
    c.write_csv(os);
    CHECK(os.str().rfind("rate_bits,distortion\n", 0) == 0);
  }

  TEST_CASE("RD curves are decreasing for every kind") {
    const auto prior = Prior::bernoulli_gaussian(0.1);
    for (auto kind : {RdKind::blahut_arimoto, RdKind::ecsq, RdKind::gaussian_highrate}) {
      RdOptions o;
      o.kind = kind;
      const auto c = build_rd_curve(prior, 0.02, 100, o);
      double prev = std::numeric_limits<double>::infinity();
      for (const auto& k : c.knots()) {
        CHECK(k.distortion < prev);
        prev = k.distortion;
      }
      CHECK(rd_kind_from_string(to_string(kind)) == kind);
    }
  }

  TEST_CASE("BA curve lies below ECSQ") {
    const auto prior = Prior::bernoulli_gaussian(0.1);
    RdOptions ba, ecsq;
    ecsq.kind = RdKind::ecsq;
    const auto cb = build_rd_curve(prior, 0.01, 100, ba);
    const auto ce = build_rd_curve(prior, 0.01, 100, ecsq);
    for (double R : {0.5, 1.0, 2.0, 4.0, 8.0}) CHECK(ce.distortion_for_rate(R) >= cb.distortion_for_rate(R));
  }
}

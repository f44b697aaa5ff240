#include <doctest.h>

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <numbers>

#include "mpamp/errors.hpp"
#include "mpamp/independence.hpp"
#include "mpamp/quadrature.hpp"
#include "mpamp/rng.hpp"

using namespace mpamp;

namespace {

// Two-sided Student-t tail probability by direct integration of the density.
double t_tail_oracle(double t, double dof) {
  const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) / std::sqrt(dof * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / dof, -(dof + 1) / 2); };
  return 1.0 - 2.0 * quad::adaptive(pdf, 0.0, std::abs(t), 1e-13).value;
}

}  // namespace

TEST_SUITE("independence") {
  TEST_CASE("perfectly correlated inputs") {
    std::vector<double> u(100), v(100);
    for (int i = 0; i < 100; ++i) {
      u[i] = std::sin(i * 0.37);
      v[i] = -u[i];
    }
    const auto a = pcc_test(u, u);
    CHECK(a.r == doctest::Approx(1.0));
    CHECK(a.reject);
    const auto b = pcc_test(u, v);
    CHECK(b.r == doctest::Approx(-1.0));
    CHECK(b.reject);
  }

  TEST_CASE("p-value matches the t-distribution tail") {
    auto rng = make_stream(4, {});
    boost::random::normal_distribution<double> g;
    for (std::size_t n : {12u, 40u, 300u}) {
      std::vector<double> u(n), v(n);
      for (std::size_t i = 0; i < n; ++i) {
        u[i] = g(rng);
        v[i] = 0.3 * u[i] + g(rng);
      }
      const auto res = pcc_test(u, v);
      const double dof = static_cast<double>(n - 2);
      const double t = res.r * std::sqrt(dof / (1 - res.r * res.r));
      CHECK(res.p_value == doctest::Approx(t_tail_oracle(t, dof)).epsilon(1e-8));
      CHECK(res.reject == (res.p_value < 0.05));
    }
  }

  TEST_CASE("degenerate inputs are rejected") {
    std::vector<double> u(10, 1.0), v(10);
    for (int i = 0; i < 10; ++i) v[i] = i;
    CHECK_THROWS_AS(pcc_test(u, v), InvalidArgument);
    CHECK_THROWS_AS(pcc_test(std::vector<double>(5, 1.0), std::vector<double>(5, 2.0)), InvalidArgument);
    CHECK_THROWS_AS(pcc_test(v, std::vector<double>(9, 0.0)), InvalidArgument);
  }

  TEST_CASE("test has nominal size on independent inputs") {
    const auto cal = calibrate(10, 100, 10'000, 3);
    CHECK(cal.tests == 1000);
    CHECK(cal.mean_rejection == doctest::Approx(0.05).epsilon(0.4));
  }

  TEST_CASE("standard grid layout") {
    const auto g = IndependenceGrid::standard();
    CHECK(g.gammas.size() == 11);
    CHECK(g.gammas.back() == std::ldexp(1.0, -10));
    CHECK(g.sigmas.size() == 8);
    CHECK(g.sigmas.front() == doctest::Approx(std::pow(10, -0.5)));
    CHECK(g.sigmas.back() == doctest::Approx(1e-4));
  }

  TEST_CASE("grid is reproducible and separates coarse from fine bins") {
    IndependenceGrid g;
    g.gammas = {1.0, 1.0 / 64};
    g.sigmas = {0.1};
    g.trials = 20;
    g.N = 2000;
    g.P = 20;
    const auto prior = Prior::bernoulli_gaussian(0.1);
    const auto a = rejection_grid(prior, g, 5);
    const auto b = rejection_grid(prior, g, 5);
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
      CHECK(a.cells[k].reject_wn == b.cells[k].reject_wn);
      CHECK(a.cells[k].reject_wnx == b.cells[k].reject_wnx);
    }
    CHECK_FALSE(a.at(0, 0).admissible());
    CHECK(a.at(0, 1).admissible());
    CHECK(a.at(0, 0).reject_wn > 0.5);
    CHECK(a.at(0, 1).reject_wn <= 0.25);
  }

  TEST_CASE("vanishing quantization error is flagged") {
    IndependenceGrid g;
    g.gammas = {1e-300};
    g.sigmas = {0.1};
    g.trials = 2;
    g.N = 100;
    g.P = 2;
    const auto r = rejection_grid(Prior::bernoulli_gaussian(0.1), g, 1);
    CHECK(r.at(0, 0).degenerate);
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dp_oracle.hpp"
#include "mpamp/errors.hpp"
#include "mpamp/rate_scheduler.hpp"

using namespace mpamp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SystemConfig sensor() {
  SystemConfig c;
  c.prior = Prior::bernoulli_gaussian(0.1);
  c.kappa = 0.4;
  c.sigma_z2 = 1.0 / 400;
  c.P = 100;
  return c;
}

RdOptions highrate() {
  RdOptions o;
  o.kind = RdKind::gaussian_highrate;
  return o;
}

struct Fixture {
  SystemConfig config = sensor();
  StateEvolution se{config};
  double delta = emse_from_db(1.0, se.mmse());
  GridOptions options = [] {
    GridOptions g;
    g.dsigma_db = 0.05;
    g.dr = 0.1;
    return g;
  }();
  DpGrid grid = DpGrid::for_target(se, options, delta);
  RdFamily rd{config.prior, config.P, se.fixed_point().sigma_inf2, grid.sigma2(0), highrate()};
  Transitions tr{se, rd, grid};
};

// Right-hand side of the recursion written out from the transition table.
double independent_bellman(const Transitions& tr, const std::vector<double>& prev, bool base, std::size_t i, double b,
                           double delta) {
  double best = prev[i];
  const auto rates = tr.grid().rates();
  for (std::size_t j = 1; j < rates.size(); ++j) {
    if (!tr.valid(i, j)) continue;
    double cont;
    if (tr.mse(i, j) - tr.se().mmse() <= delta) {
      cont = 0.0;
    } else if (base) {
      cont = kInf;
    } else {
      const double pos = std::clamp(tr.position(i, j), 0.0, static_cast<double>(prev.size() - 1));
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, prev.size() - 1);
      const double w = pos - static_cast<double>(lo);
      if (w < 1e-9) cont = prev[lo];
      else if (w > 1 - 1e-9) cont = prev[hi];
      else if (prev[lo] == kInf || prev[hi] == kInf) cont = kInf;
      else cont = (1 - w) * prev[lo] + w * prev[hi];
    }
    best = std::min(best, b + rates[j] + cont);
  }
  return best;
}

}  // namespace

TEST_SUITE("rate_scheduler") {
  TEST_CASE("cost of a schedule") {
    CHECK(cost_of({}, 2.0) == 0.0);
    const std::vector<double> a{1.0, 2.0}, z{0.0, 1.0};
    CHECK(cost_of(a, 2.0) == 7.0);
    CHECK(cost_of(z, 2.0) == 3.0);
  }

  TEST_CASE("grid construction") {
    Fixture f;
    const auto& g = f.tr.grid();
    CHECK(g.sigma2(0) == f.se.initial_sigma2());
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.sigma2(i) < g.sigma2(i - 1));
    CHECK(g.position(g.sigma2(7)) == doctest::Approx(7.0));
    CHECK(g.rates().front() == 0.0);
    CHECK(g.rates().back() == doctest::Approx(16.0));
  }

  TEST_CASE("transitions match lossy SE") {
    Fixture f;
    const auto rates = f.tr.grid().rates();
    for (std::size_t i = 0; i < f.tr.grid().size(); i += 37)
      for (std::size_t j = 1; j < rates.size(); j += 13) {
        REQUIRE(f.tr.valid(i, j));
        const double s2 = f.tr.grid().sigma2(i);
        const double D = f.rd.distortion(s2, rates[j]);
        CHECK(f.tr.mse(i, j) == doctest::Approx(f.se.mse(s2 + f.config.P * D)).epsilon(1e-12));
      }
  }

  TEST_CASE("targets above the signal power give the empty schedule") {
    Fixture f;
    const auto sol = solve(f.tr, 2.0, f.config.prior.second_moment());
    CHECK(sol.schedule.T() == 0);
    CHECK(sol.schedule.cost() == 0.0);
    CHECK(sol.schedule.trajectory.final_mse() == doctest::Approx(0.1));
  }

  TEST_CASE("solution meets the target and is consistent with its table") {
    Fixture f;
    const auto sol = solve(f.tr, 2.0, f.delta);
    CHECK(sol.schedule.trajectory.final_emse() <= f.delta);
    CHECK(sol.schedule.cost() == doctest::Approx(cost_of(sol.schedule.rates, 2.0)));
    CHECK(sol.schedule.r_agg() > 0.0);
    // extracted schedule cost is close to the grid optimum
    CHECK(std::abs(sol.schedule.cost() - sol.phi_start) < 0.5);
  }

  TEST_CASE("Bellman consistency and monotonicity in the horizon") {
    Fixture f;
    for (double b : {0.3, 2.0}) {
      const auto sol = solve(f.tr, b, f.delta);
      const auto& phi = sol.table.phi;
      for (std::size_t k = 1; k < phi.size(); ++k)
        for (std::size_t i = 0; i < phi[k].size(); ++i) {
          CHECK(phi[k][i] <= phi[k - 1][i]);
          CHECK(bellman_value(f.tr, phi[k - 1], k == 1, i, b, f.delta, Lookup::linear) == phi[k][i]);
          const double oracle_value = independent_bellman(f.tr, phi[k - 1], k == 1, i, b, f.delta);
          if (std::isinf(phi[k][i]))
            CHECK(std::isinf(oracle_value));
          else
            CHECK(oracle_value == doctest::Approx(phi[k][i]));
        }
    }
  }

  TEST_CASE("DP equals exhaustive enumeration on tiny instances") {
    std::mt19937_64 rng(2024);
    int feasible = 0;
    for (int n = 0; n < 20; ++n) {
      const auto c = oracle::random_case(rng);
      const StateEvolution se(c.config);
      const double delta = emse_from_db(c.delta_db, se.mmse());
      GridOptions g;
      g.dr = 1.0;
      g.r_max = 3.0;
      g.nodes = 50;
      const auto grid = DpGrid::for_target(se, g, delta);
      REQUIRE(grid.size() == 50);
      const RdFamily rd(c.config.prior, c.config.P, se.fixed_point().sigma_inf2, grid.sigma2(0), highrate());
      const Transitions tr(se, rd, grid);
      SolveOptions opts;
      opts.t_max = 4;
      opts.patience = 4;
      opts.lookup = Lookup::nearest;
      const double expected = oracle::brute_force(tr, 4, c.b, delta);
      double got = kInf;
      try {
        got = solve(tr, c.b, delta, opts).phi_start;
      } catch (const Infeasible&) {
      }
      CHECK(got == expected);
      feasible += expected < kInf;
    }
    CHECK(feasible >= 10);
  }

  TEST_CASE("infeasible targets are reported") {
    Fixture f;
    SolveOptions o;
    o.t_max = 2;
    CHECK_THROWS_AS(solve(f.tr, 1.0, f.delta, o), Infeasible);
    CHECK_THROWS_AS(solve(f.tr, -1.0, f.delta), InvalidArgument);
  }

  TEST_CASE("interpolation check at identical resolution is exact") {
    Fixture f;
    const auto rep = verify_interpolation(f.se, f.rd, f.options, f.options.dsigma_db, 2.0, f.delta);
    CHECK_FALSE(rep.errors.empty());
    CHECK(rep.max_abs == 0.0);
  }

  TEST_CASE("interpolation error shrinks as the coarse grid refines") {
    Fixture f;
    double prev = kInf;
    for (double coarse : {0.2, 0.1, 0.05}) {
      GridOptions g = f.options;
      g.dsigma_db = coarse;
      const auto rep = verify_interpolation(f.se, f.rd, g, 0.0125, 2.0, f.delta);
      const double mean_abs = [&] {
        double s = 0;
        for (double e : rep.errors) s += std::abs(e);
        return s / rep.errors.size();
      }();
      CHECK(mean_abs <= prev);
      prev = mean_abs;
    }
  }

  TEST_CASE("rate perturbations") {
    Fixture f;
    const auto sol = solve(f.tr, 2.0, f.delta);
    const auto zero = verify_rate_resolution(f.se, f.rd, sol.schedule, 0.0, 5, 1);
    CHECK(zero.considered == 5);
    for (double d : zero.delta_ragg) CHECK(d == 0.0);
    const auto rep = verify_rate_resolution(f.se, f.rd, sol.schedule, 0.1, 200, 1);
    CHECK(rep.trials == 200);
    for (double d : rep.delta_ragg) CHECK(d >= -static_cast<double>(sol.schedule.T()) * 0.05 - 1e-12);
  }

  TEST_CASE("monotonicity and tail-growth reports") {
    const std::vector<double> up{0.1, 0.5, 0.5, 1.0}, down{0.1, 0.5, 0.4, 1.0};
    CHECK(check_monotone(up).monotone);
    const auto m = check_monotone(down);
    CHECK_FALSE(m.monotone);
    REQUIRE(m.violations.size() == 1);
    CHECK(m.violations[0] == 2);
    const std::vector<double> lin{1, 1.7, 2.4, 3.1, 3.8, 4.5, 5.2};
    CHECK(tail_growth_deviation(lin, 0.7) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

#include <doctest.h>

#include <cmath>

#include "mpamp/errors.hpp"
#include "mpamp/rate_distortion.hpp"
#include "mpamp/simulator.hpp"

using namespace mpamp;

namespace {

SystemConfig small(int P) {
  SystemConfig c;
  c.prior = Prior::bernoulli_gaussian(0.1);
  c.kappa = 0.5;
  c.sigma_z2 = 0.01;
  c.P = P;
  return c;
}

SimulationOptions with_n(std::size_t N) {
  SimulationOptions o;
  o.N = N;
  return o;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("identical seeds give identical trajectories") {
    const auto c = small(10);
    const std::vector<double> g{0.02, 0.01, 0.005};
    const auto a = run_trial(c, g, 3, with_n(2000));
    const auto b = run_trial(c, g, 3, with_n(2000));
    const auto d = run_trial(c, g, 4, with_n(2000));
    REQUIRE(a.records.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(a.records[t].mse == b.records[t].mse);
      CHECK(a.records[t].sigma2_hat == b.records[t].sigma2_hat);
    }
    CHECK(a.records[2].mse != d.records[2].mse);
  }

  TEST_CASE("dimension checks") {
    CHECK_THROWS_AS(run_trial(small(3), std::vector<double>{0.0}, 1, with_n(2000)), InvalidArgument);
    CHECK_THROWS_AS(run_trial(small(10), std::vector<double>{0.0}, 1, with_n(2001)), InvalidArgument);
    CHECK_THROWS_AS(run_trial(small(10), std::vector<double>{}, 1, with_n(2000)), InvalidArgument);
  }

  TEST_CASE("lossless single-node AMP tracks state evolution") {
    const auto c = small(1);
    const StateEvolution se(c);
    const std::vector<double> zeros(6, 0.0);
    const auto ens = run_ensemble(se, zeros, 12, 77, with_n(4000));
    REQUIRE(ens.stderr_defined);
    for (const auto& row : ens.rows) CHECK(std::abs(row.mean_mse - row.predicted_mse) < 3 * row.stderr_mse);
    CHECK(residual_variance_check(ens).ok());
    CHECK(ens.rows[0].predicted_sigma2 == doctest::Approx(c.initial_sigma2()));
  }

  TEST_CASE("fusion center receives the sum of quantized node messages") {
    const auto c = small(10);
    const std::vector<double> g{0.03, 0.01};
    std::vector<std::vector<double>> sums(2, std::vector<double>(2000, 0.0));
    std::vector<std::vector<double>> fused(2);
    SimulationOptions o = with_n(2000);
    o.message_sink = [&](const NodeMessage& m) {
      REQUIRE(m.bins.size() == 2000);
      for (std::size_t j = 0; j < m.bins.size(); ++j) sums[m.t - 1][j] += m.gamma * static_cast<double>(m.bins[j]);
    };
    o.fusion_observer = [&](std::size_t t, std::span<const double> f) { fused[t - 1].assign(f.begin(), f.end()); };
    run_trial(c, g, 5, o);
    for (int t = 0; t < 2; ++t) CHECK(sums[t] == fused[t]);
  }

  TEST_CASE("quantization error variance matches the predicted distortion") {
    const auto c = small(10);
    const StateEvolution se(c);
    const auto g = random_admissible_bins(se, 5, 9);
    for (std::size_t t = 0; t < g.size(); ++t) CHECK(g[t] > 0.0);
    const auto ens = run_ensemble(se, g, 4, 21, with_n(4000));
    for (const auto& row : ens.rows)
      CHECK(row.mean_distortion == doctest::Approx(row.predicted_distortion).epsilon(0.05));
  }

  TEST_CASE("a wrong Onsager coefficient is detected") {
    const auto c = small(10);
    const StateEvolution se(c);
    const std::vector<double> zeros(6, 0.0);
    SimulationOptions o = with_n(4000);
    const auto ok = run_trial(c, zeros, 8, o);
    CHECK(residual_variance_check(ok, predict(se, zeros), 4.0).ok());
    o.onsager_scale = 0.0;
    const auto bad = run_trial(c, zeros, 8, o);
    CHECK_FALSE(residual_variance_check(bad, predict(se, zeros)).ok());
  }

  TEST_CASE("removing the Onsager term breaks agreement with lossy SE") {
    SystemConfig c = small(100);
    const StateEvolution se(c);
    const auto g = random_admissible_bins(se, 5, 3);
    SimulationOptions o = with_n(10'000);
    o.onsager_scale = 0.0;
    const auto ens = run_ensemble(se, g, 2, 5, o);
    CHECK(std::abs(ens.rows[4].gap_db) > 1.0);
  }

  TEST_CASE("a single trial leaves the standard error undefined") {
    const auto c = small(10);
    const StateEvolution se(c);
    const auto ens = run_ensemble(se, std::vector<double>{0.0, 0.0}, 1, 1, with_n(2000));
    CHECK_FALSE(ens.stderr_defined);
    CHECK(std::isnan(ens.rows[0].stderr_mse));
  }

  TEST_CASE("bins for a schedule are admissible") {
    const auto c = small(100);
    const StateEvolution se(c);
    RdOptions o;
    o.kind = RdKind::ecsq;
    o.bin_constraint = true;
    o.reconstruction = Reconstruction::midpoint;
    const RdFamily rd(c.prior, c.P, se.fixed_point().sigma_inf2, se.initial_sigma2(), o);
    RateSchedule s;
    s.rates = {2.0, 2.5, 3.0};
    s.trajectory = run_schedule(se, s.rates, rd);
    const auto g = bins_for_schedule(se, s);
    REQUIRE(g.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
      const auto& st = s.trajectory.states[t];
      CHECK(bin_size_admissible(g[t], st.sigma2, c.P));
      const auto pt = ecsq_point(node_source(c.prior, st.sigma2, c.P), {g[t], Reconstruction::midpoint});
      CHECK(pt.distortion <= st.distortion * (1 + 1e-6));
    }
  }
}

#include "mpamp/independence.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <ostream>

#include "mpamp/errors.hpp"
#include "mpamp/rng.hpp"

namespace mpamp {

PccResult pcc_test(std::span<const double> u, std::span<const double> v, double alpha) {
  if (u.size() != v.size()) throw InvalidArgument("pcc_test: length mismatch");
  const std::size_t n = u.size();
  if (n < 8) throw InvalidArgument("pcc_test needs at least 8 samples");
  double mu = 0, mv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= static_cast<double>(n);
  mv /= static_cast<double>(n);
  double suu = 0, svv = 0, suv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u[i] - mu, b = v[i] - mv;
    suu += a * a;
    svv += b * b;
    suv += a * b;
  }
  if (!(suu > 0) || !(svv > 0)) throw InvalidArgument("pcc_test: zero-variance input");
  PccResult out;
  out.r = std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
  const double dof = static_cast<double>(n - 2);
  if (std::abs(out.r) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.r * std::sqrt(dof / (1.0 - out.r * out.r));
    boost::math::students_t dist(dof);
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  out.reject = out.p_value < alpha;
  return out;
}

IndependenceGrid IndependenceGrid::standard() {
  IndependenceGrid g;
  for (int k = 0; k <= 10; ++k) g.gammas.push_back(std::ldexp(1.0, -k));
  for (int k = 1; k <= 8; ++k) g.sigmas.push_back(std::pow(10.0, -0.5 * k));
  return g;
}

void IndependenceResult::write_csv(std::ostream& os) const {
  os << "gamma,sigma,rejection_fraction_wn,rejection_fraction_wnx,degenerate\n";
  os.precision(10);
  for (const auto& c : cells)
    os << c.gamma << ',' << c.sigma << ',' << c.reject_wn << ',' << c.reject_wnx << ',' << (c.degenerate ? 1 : 0)
       << '\n';
}

IndependenceResult rejection_grid(const Prior& prior, const IndependenceGrid& grid, std::uint64_t seed,
                                  Parallelism par) {
  if (grid.gammas.empty() || grid.sigmas.empty() || grid.trials == 0 || grid.N < 8 || !(grid.P >= 1))
    throw InvalidArgument("independence grid must be nonempty with N >= 8 and P >= 1");
  const auto nodes = static_cast<std::size_t>(grid.P);
  IndependenceResult res;
  res.gamma_count = grid.gammas.size();
  res.cells.resize(grid.sigmas.size() * grid.gammas.size());
  parallel_for(res.cells.size(), par, [&](std::size_t c) {
    const std::size_t si = c / res.gamma_count, gi = c % res.gamma_count;
    IndependenceCell& cell = res.cells[c];
    cell.sigma = grid.sigmas[si];
    cell.gamma = grid.gammas[gi];
    std::vector<double> x(grid.N), w(grid.N), n(grid.N), wn(grid.N);
    std::size_t tested = 0, rej_wn = 0, rej_wnx = 0;
    for (std::size_t k = 0; k < grid.trials; ++k) {
      auto rng = make_stream(seed, {si, gi, k});
      boost::random::normal_distribution<double> noise(0.0, cell.sigma);
      for (auto& xi : x) xi = prior.sample(rng);
      std::fill(w.begin(), w.end(), 0.0);
      std::fill(n.begin(), n.end(), 0.0);
      for (std::size_t p = 0; p < nodes; ++p) {
        for (std::size_t i = 0; i < grid.N; ++i) {
          const double wp = noise(rng);
          const double f = x[i] / grid.P + wp;
          w[i] += wp;
          n[i] += cell.gamma * std::nearbyint(f / cell.gamma) - f;
        }
      }
      double nn = 0.0, ww = 0.0;
      for (std::size_t i = 0; i < grid.N; ++i) {
        wn[i] = w[i] + n[i];
        nn += n[i] * n[i];
        ww += w[i] * w[i];
      }
      // Quantization error at rounding level: the correlation is meaningless.
      if (nn <= 1e-24 * ww) {
        cell.degenerate = true;
        continue;
      }
      try {
        rej_wn += pcc_test(w, n).reject;
        rej_wnx += pcc_test(wn, x).reject;
        ++tested;
      } catch (const InvalidArgument&) {
        cell.degenerate = true;
      }
    }
    if (tested > 0) {
      cell.reject_wn = static_cast<double>(rej_wn) / static_cast<double>(tested);
      cell.reject_wnx = static_cast<double>(rej_wnx) / static_cast<double>(tested);
    }
  });
  return res;
}

CalibrationResult calibrate(std::size_t cells, std::size_t trials, std::size_t N, std::uint64_t seed,
                            Parallelism par) {
  std::vector<std::size_t> rejected(cells, 0);
  parallel_for(cells, par, [&](std::size_t c) {
    std::vector<double> u(N), v(N);
    for (std::size_t k = 0; k < trials; ++k) {
      auto rng = make_stream(seed, {0xCA1, c, k});
      boost::random::normal_distribution<double> g;
      for (std::size_t i = 0; i < N; ++i) {
        u[i] = g(rng);
        v[i] = g(rng);
      }
      rejected[c] += pcc_test(u, v).reject;
    }
  });
  CalibrationResult out;
  out.tests = cells * trials;
  std::size_t total = 0;
  for (auto r : rejected) total += r;
  out.mean_rejection = out.tests == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(out.tests);
  return out;
}

}  // namespace mpamp

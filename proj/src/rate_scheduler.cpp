#include "mpamp/rate_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "mpamp/errors.hpp"

namespace mpamp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

DpGrid::DpGrid(const StateEvolution& se, const GridOptions& options, double floor_excess) : options_(options) {
  if (!(options.dr > 0.0) || !(options.r_max >= options.dr)) throw InvalidArgument("rate grid needs 0 < dr <= r_max");
  sigma_inf2_ = se.fixed_point().sigma_inf2;
  const double top = se.initial_sigma2() - sigma_inf2_;
  if (!(floor_excess > 0.0) || !(floor_excess < top)) throw InvalidArgument("grid floor must lie in (0, sigma_1^2 - sigma_inf^2)");
  top_db_ = 10.0 * std::log10(top);
  const double span_db = top_db_ - 10.0 * std::log10(floor_excess);
  std::size_t n = 0;
  if (options.nodes > 0) {
    if (options.nodes < 2) throw InvalidArgument("sigma2 grid needs at least two nodes");
    n = options.nodes;
    step_db_ = span_db / static_cast<double>(n - 1);
  } else {
    if (!(options.dsigma_db > 0.0)) throw InvalidArgument("sigma2 grid resolution must be positive");
    step_db_ = options.dsigma_db;
    n = static_cast<std::size_t>(std::ceil(span_db / step_db_ - 1e-9)) + 1;
  }
  sigma2_.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    sigma2_[i] = sigma_inf2_ + top * std::pow(10.0, -static_cast<double>(i) * step_db_ / 10.0);
  sigma2_[0] = se.initial_sigma2();

  const auto count = static_cast<std::size_t>(std::llround(options.r_max / options.dr)) + 1;
  if (count > std::numeric_limits<std::uint16_t>::max()) throw InvalidArgument("rate grid too large");
  rates_.resize(count);
  for (std::size_t j = 0; j < count; ++j) rates_[j] = static_cast<double>(j) * options.dr;
}

DpGrid DpGrid::for_target(const StateEvolution& se, const GridOptions& options, double delta) {
  const double e1 = se.initial_sigma2() - se.fixed_point().sigma_inf2;
  return DpGrid(se, options, std::min(0.5 * delta / se.config().kappa, 0.5 * e1));
}

double DpGrid::position(double sigma2) const noexcept {
  const double excess = sigma2 - sigma_inf2_;
  if (!(excess > 0.0)) return static_cast<double>(sigma2_.size());
  return (top_db_ - 10.0 * std::log10(excess)) / step_db_;
}

Transitions::Transitions(const StateEvolution& se, const RdFamily& rd, DpGrid grid, Parallelism par)
    : se_(&se), rd_(&rd), grid_(std::move(grid)) {
  const std::size_t n = grid_.size();
  const std::size_t m = rate_count();
  if (rd.sigma2_lo() > grid_.sigma2(n - 1) * (1.0 + 1e-12) || rd.sigma2_hi() < grid_.sigma2(0) * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "RD family range [" << rd.sigma2_lo() << ", " << rd.sigma2_hi() << "] does not cover the grid ["
       << grid_.sigma2(n - 1) << ", " << grid_.sigma2(0) << "]";
    throw InvalidArgument(os.str());
  }
  mse_.assign(n * m, -1.0);
  pos_.assign(n * m, 0.0);
  const auto& cfg = se.config();
  parallel_for(n, par, [&](std::size_t i) {
    const double s2 = grid_.sigma2(i);
    for (std::size_t j = 1; j < m; ++j) {
      const auto d = rd.try_distortion(s2, grid_.rates()[j]);
      if (!d) continue;
      const double mse = se.mse(s2 + cfg.P * *d);
      mse_[i * m + j] = mse;
      pos_[i * m + j] = grid_.position(cfg.sigma_z2 + mse / cfg.kappa);
    }
  });
}

double RateSchedule::r_agg() const noexcept {
  double s = 0.0;
  for (double r : rates) s += r;
  return s;
}

double RateSchedule::cost() const noexcept { return cost_of(rates, b); }

double cost_of(std::span<const double> rates, double b) noexcept {
  double c = 0.0;
  for (double r : rates) c += (r != 0.0 ? b : 0.0) + r;
  return c;
}

double lookup_phi(std::span<const double> layer, double position, Lookup mode) noexcept {
  const std::size_t last = layer.size() - 1;
  if (!(position > 0.0)) return layer[0];
  if (position >= static_cast<double>(last)) return layer[last];
  if (mode == Lookup::nearest) return layer[static_cast<std::size_t>(std::lround(position))];
  auto i = static_cast<std::size_t>(position);
  double w = position - static_cast<double>(i);
  if (w < 1e-9) return layer[i];
  if (w > 1.0 - 1e-9) return layer[i + 1];
  const double a = layer[i];
  const double b = layer[i + 1];
  // A cell touching an infeasible node is infeasible; borrowing the finite
  // neighbour would claim reachability that the lower-noise node alone has.
  if (a == kInf || b == kInf) return kInf;
  return a + w * (b - a);
}

namespace {

struct Choice {
  double value = kInf;
  std::size_t rate = 0;
};

// The zero-horizon layer is never interpolated: a step either meets the
// target exactly or has no continuation.
double continuation(std::span<const double> previous, bool base, bool terminal, double position, Lookup mode) {
  if (terminal) return 0.0;
  return base ? kInf : lookup_phi(previous, position, mode);
}

Choice best_action(const Transitions& tr, std::span<const double> previous, bool base, std::size_t i, double b,
                   double delta, double mmse, Lookup mode) {
  Choice c{previous[i], 0};
  const auto rates = tr.grid().rates();
  for (std::size_t j = 1; j < rates.size(); ++j) {
    if (!tr.valid(i, j)) continue;
    const double cont = continuation(previous, base, tr.mse(i, j) - mmse <= delta, tr.position(i, j), mode);
    const double v = b + rates[j] + cont;
    if (v < c.value) c = {v, j};
  }
  return c;
}

}  // namespace

double bellman_value(const Transitions& tr, std::span<const double> previous, bool base, std::size_t i, double b,
                     double delta, Lookup mode) {
  return best_action(tr, previous, base, i, b, delta, tr.se().mmse(), mode).value;
}

DpSolution solve(const Transitions& tr, double b, double delta, const SolveOptions& options) {
  if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidArgument("cost weight b must be nonnegative");
  if (!(delta > 0.0)) throw InvalidArgument("target EMSE must be positive");
  if (options.t_max < 1 || options.patience < 1) throw InvalidArgument("t_max and patience must be positive");
  const auto& se = tr.se();
  const auto& cfg = se.config();
  const auto& grid = tr.grid();
  const double mmse = se.mmse();
  const std::size_t n = grid.size();

  DpSolution sol;
  sol.schedule.b = b;
  sol.schedule.delta = delta;
  if (delta >= cfg.prior.second_moment() - mmse) {
    sol.schedule.trajectory = run_distortions(se, {});
    return sol;
  }

  std::vector<double> phi0(n);
  for (std::size_t i = 0; i < n; ++i)
    phi0[i] = cfg.kappa * (grid.sigma2(i) - cfg.sigma_z2) - mmse <= delta ? 0.0 : kInf;
  sol.table.phi.push_back(std::move(phi0));
  sol.table.argrate.emplace_back(n, 0);

  int stale = 0;
  for (int k = 1; k <= options.t_max; ++k) {
    const auto& prev = sol.table.phi.back();
    std::vector<double> layer(n);
    std::vector<std::uint16_t> arg(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = best_action(tr, prev, k == 1, i, b, delta, mmse, options.lookup);
      layer[i] = c.value;
      arg[i] = static_cast<std::uint16_t>(c.rate);
    }
    const bool improved = layer[0] < prev[0] - 1e-12;
    sol.table.phi.push_back(std::move(layer));
    sol.table.argrate.push_back(std::move(arg));
    if (sol.table.phi.back()[0] < kInf) {
      stale = improved ? 0 : stale + 1;
      if (stale >= options.patience) break;
    }
  }
  const std::size_t K = sol.table.horizons();
  sol.phi_start = sol.table.phi[K][0];
  if (sol.phi_start == kInf) {
    std::ostringstream os;
    os << "no schedule of at most " << options.t_max << " iterations reaches EMSE " << delta;
    throw Infeasible(os.str());
  }

  // Forward pass at the exact (off-grid) states. Interpolation near the
  // feasibility frontier can be optimistic; when no finite action remains
  // the horizon is extended rather than failing.
  const auto rates = grid.rates();
  const auto& rd = tr.rd();
  double sigma2 = se.initial_sigma2();
  std::size_t k = K;
  const std::size_t cap = static_cast<std::size_t>(options.t_max) + K;
  for (;;) {
    if (sol.schedule.rates.size() >= cap) throw NumericalError("schedule extraction did not terminate");
    std::vector<std::pair<double, double>> actions;  // (mse, next) per rate, mse < 0 if unavailable
    actions.reserve(rates.size());
    for (std::size_t j = 0; j < rates.size(); ++j) {
      const auto d = j == 0 ? std::nullopt : rd.try_distortion(sigma2, rates[j]);
      if (!d) {
        actions.emplace_back(-1.0, 0.0);
        continue;
      }
      const double m = se.mse(sigma2 + cfg.P * *d);
      actions.emplace_back(m, cfg.sigma_z2 + m / cfg.kappa);
    }
    double best = kInf;
    std::size_t best_j = 0;
    for (std::size_t h = std::max<std::size_t>(k, 1); h <= K && best == kInf; ++h) {
      const auto& layer = sol.table.phi[h - 1];
      for (std::size_t j = 1; j < rates.size(); ++j) {
        if (actions[j].first < 0.0) continue;
        const bool terminal = actions[j].first - mmse <= delta;
        const double v = b + rates[j] +
                         continuation(layer, h == 1, terminal, grid.position(actions[j].second), options.lookup);
        if (v < best) {
          best = v;
          best_j = j;
        }
      }
      if (best < kInf) k = h;
    }
    if (best == kInf) throw NumericalError("schedule extraction reached a state with no feasible action");
    sol.schedule.rates.push_back(rates[best_j]);
    if (actions[best_j].first - mmse <= delta) break;
    sigma2 = actions[best_j].second;
    --k;
  }
  sol.schedule.trajectory = run_schedule(se, sol.schedule.rates, rd);
  if (!(sol.schedule.trajectory.final_emse() <= delta)) {
    std::ostringstream os;
    os << "extracted schedule misses the target (EMSE " << sol.schedule.trajectory.final_emse() << " > " << delta
       << ")";
    throw NumericalError(os.str(), sol.schedule.trajectory.final_emse());
  }
  return sol;
}

InterpolationReport summarize_errors(std::vector<double> errors) {
  InterpolationReport r;
  r.errors = std::move(errors);
  if (r.errors.empty()) return r;
  std::vector<double> mag(r.errors.size());
  std::transform(r.errors.begin(), r.errors.end(), mag.begin(), [](double e) { return std::abs(e); });
  std::sort(mag.begin(), mag.end());
  auto q = [&](double p) {
    const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(mag.size()))) - 1;
    return mag[std::min(idx, mag.size() - 1)];
  };
  r.p50 = q(0.5);
  r.p99 = q(0.99);
  r.max_abs = mag.back();
  return r;
}

InterpolationReport verify_interpolation(const StateEvolution& se, const RdFamily& rd, const GridOptions& coarse,
                                         double fine_db, double b, double delta, Parallelism par) {
  const double ratio = coarse.dsigma_db / fine_db;
  if (!(fine_db > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
    throw InvalidArgument("fine resolution must divide the coarse resolution");
  GridOptions fine = coarse;
  fine.dsigma_db = fine_db;
  fine.nodes = 0;
  const Transitions tc(se, rd, DpGrid::for_target(se, coarse, delta), par);
  const Transitions tf(se, rd, DpGrid::for_target(se, fine, delta), par);
  const auto sc = solve(tc, b, delta);
  const auto sf = solve(tf, b, delta);
  const std::size_t K = std::min(sc.table.horizons(), sf.table.horizons());
  std::vector<double> errors;
  for (std::size_t k = 1; k <= K; ++k) {
    const auto& pc = sc.table.phi[k];
    const auto& pf = sf.table.phi[k];
    for (std::size_t i = 0; i < tf.grid().size(); ++i) {
      if (pf[i] == kInf) continue;
      const double interp = lookup_phi(pc, tc.grid().position(tf.grid().sigma2(i)), Lookup::linear);
      if (interp == kInf) continue;
      errors.push_back(interp - pf[i]);
    }
  }
  return summarize_errors(std::move(errors));
}

RatePerturbationReport verify_rate_resolution(const StateEvolution& se, const RdFamily& rd,
                                              const RateSchedule& schedule, double dr, std::size_t trials,
                                              std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("need at least one perturbation trial");
  RatePerturbationReport rep;
  rep.trials = trials;
  const double reference = schedule.trajectory.final_emse();
  const double r_agg = schedule.r_agg();
  auto rng = make_stream(seed, {0x5eed});
  std::uniform_real_distribution<double> beta(-dr / 2.0, dr / 2.0);
  std::vector<double> perturbed(schedule.rates.size());
  for (std::size_t k = 0; k < trials; ++k) {
    for (std::size_t t = 0; t < perturbed.size(); ++t) perturbed[t] = std::max(0.0, schedule.rates[t] + beta(rng));
    Trajectory traj;
    try {
      traj = run_schedule(se, perturbed, rd);
    } catch (const InvalidArgument&) {
      continue;  // a rate fell below the achievable range
    }
    if (!(traj.final_emse() <= reference)) continue;
    double agg = 0.0;
    for (double r : perturbed) agg += r;
    const double d = agg - r_agg;
    ++rep.considered;
    if (d < 0.0) ++rep.improved;
    rep.delta_ragg.push_back(d);
    rep.min_delta_ragg = rep.considered == 1 ? d : std::min(rep.min_delta_ragg, d);
  }
  return rep;
}

MonotonicityReport check_monotone(std::span<const double> rates) {
  MonotonicityReport r;
  for (std::size_t t = 1; t < rates.size(); ++t) {
    if (rates[t] < rates[t - 1]) {
      r.monotone = false;
      r.violations.push_back(t);
    }
  }
  return r;
}

double tail_growth_deviation(std::span<const double> rates, double growth, std::size_t window) {
  if (rates.size() < window + 1) throw InvalidArgument("schedule too short for the tail window");
  double acc = 0.0;
  for (std::size_t t = rates.size() - window; t < rates.size(); ++t)
    acc += std::abs((rates[t] - rates[t - 1]) - growth);
  return acc / static_cast<double>(window);
}

}  // namespace mpamp

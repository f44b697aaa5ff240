#include "mpamp/tradeoff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "mpamp/errors.hpp"

namespace mpamp {

bool dominates(const ParetoPoint& a, const ParetoPoint& b) noexcept {
  const bool le = a.T <= b.T && a.r_agg <= b.r_agg && a.mse <= b.mse;
  const bool lt = a.T < b.T || a.r_agg < b.r_agg || a.mse < b.mse;
  return le && lt;
}

std::string_view to_string(Platform p) noexcept {
  switch (p) {
    case Platform::sensor: return "sensor";
    case Platform::cloud: return "cloud";
    case Platform::gpu: return "gpu";
    case Platform::custom: return "custom";
  }
  return "custom";
}

Platform platform_from_string(std::string_view name) {
  for (auto p : {Platform::sensor, Platform::cloud, Platform::gpu, Platform::custom})
    if (to_string(p) == name) return p;
  throw InvalidArgument("unknown platform '" + std::string(name) + "'");
}

PlatformB platform_b(const PlatformCost& pc) {
  if (!(pc.N > 0 && pc.M > 0 && pc.P > 0)) throw InvalidArgument("platform sizes must be positive");
  PlatformB out;
  switch (pc.platform) {
    case Platform::sensor:
      // Two mat-vec products with 10x memory overhead on a 32 MHz core;
      // messages over a 250 kbps radio with 2x protocol overhead.
      out.c4 = 20.0 * pc.M * pc.N / (32e6 * pc.P);
      out.c5 = 2.0 * pc.N / 250e3;
      break;
    case Platform::cloud:
    case Platform::gpu: {
      out.c4 = 20.0 * pc.M * pc.N / (2e9 * pc.P) * 0.03 / 3600.0;
      out.c5 = 2.0 * pc.N * 0.03 / 8e9;
      if (pc.platform == Platform::gpu) out.c5 /= 100.0;
      break;
    }
    case Platform::custom:
      if (!(pc.custom_b > 0)) throw InvalidArgument("custom b must be positive");
      out.c4 = pc.custom_b;
      out.c5 = 1.0;
      break;
  }
  out.b = out.c4 / out.c5;
  return out;
}

std::vector<SweepCell> sweep(const Transitions& tr, std::span<const double> b_grid,
                             std::span<const double> delta_grid, const SolveOptions& options, Parallelism par) {
  if (b_grid.empty() || delta_grid.empty()) throw InvalidArgument("sweep grids must be nonempty");
  std::vector<SweepCell> cells(b_grid.size() * delta_grid.size());
  parallel_for(cells.size(), par, [&](std::size_t k) {
    SweepCell& cell = cells[k];
    cell.b = b_grid[k / delta_grid.size()];
    cell.delta = delta_grid[k % delta_grid.size()];
    try {
      const DpSolution sol = solve(tr, cell.b, cell.delta, options);
      ParetoPoint p;
      p.T = sol.schedule.T();
      p.r_agg = sol.schedule.r_agg();
      p.mse = sol.schedule.trajectory.final_mse();
      p.b = cell.b;
      p.delta = cell.delta;
      p.rates = sol.schedule.rates;
      cell.point = std::move(p);
    } catch (const Infeasible& e) {
      cell.error = e.what();
    }
  });
  return cells;
}

std::vector<ParetoPoint> collect_points(std::span<const SweepCell> cells) {
  std::vector<ParetoPoint> out;
  for (const auto& c : cells)
    if (c.point) out.push_back(*c.point);
  return out;
}

std::vector<ParetoPoint> pareto_filter(std::span<const ParetoPoint> points) {
  std::vector<ParetoPoint> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    bool keep = true;
    for (std::size_t j = 0; j < points.size() && keep; ++j) {
      if (j == i) continue;
      const auto& q = points[j];
      if (dominates(q, p)) keep = false;
      // Exact duplicates: the first occurrence survives.
      if (j < i && q.T == p.T && q.r_agg == p.r_agg && q.mse == p.mse) keep = false;
    }
    if (keep) out.push_back(p);
  }
  return out;
}

ConvexityReport convexity_of(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("convexity_of: size mismatch");
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  ConvexityReport rep;
  rep.slices = 1;
  rep.worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 2 < idx.size(); ++k) {
    const double x0 = x[idx[k]], x1 = x[idx[k + 1]], x2 = x[idx[k + 2]];
    if (!(x2 > x0)) continue;
    const double chord = y[idx[k]] + (y[idx[k + 2]] - y[idx[k]]) * (x1 - x0) / (x2 - x0);
    rep.worst_violation = std::max(rep.worst_violation, y[idx[k + 1]] - chord);
    ++rep.triples;
  }
  if (rep.triples == 0) rep.worst_violation = 0.0;
  return rep;
}

namespace {

// Lower envelope of a decreasing relation: sorted by x, keeps points whose y
// is strictly below every point to their left.
void envelope(std::vector<std::pair<double, double>>& pts) {
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> out;
  for (const auto& p : pts)
    if (out.empty() || p.second < out.back().second) {
      if (!out.empty() && out.back().first == p.first) out.back() = p;
      else out.push_back(p);
    }
  pts = std::move(out);
}

void merge(ConvexityReport& into, const ConvexityReport& slice, const std::string& name) {
  if (slice.triples == 0) return;
  if (into.slices == 0 || slice.worst_violation > into.worst_violation) {
    into.worst_violation = slice.worst_violation;
    into.worst_slice = name;
  }
  ++into.slices;
  into.triples += slice.triples;
}

ConvexityReport slices_of(const std::map<double, std::vector<std::pair<double, double>>>& groups,
                          const std::string& label) {
  ConvexityReport rep;
  for (auto [key, pts] : groups) {
    envelope(pts);
    if (pts.size() < 3) continue;
    std::vector<double> x, y;
    for (const auto& [a, b] : pts) {
      x.push_back(a);
      y.push_back(b);
    }
    std::ostringstream name;
    name << label << '=' << key;
    merge(rep, convexity_of(x, y), name.str());
  }
  return rep;
}

}  // namespace

SurfaceConvexity convexity_check(std::span<const ParetoPoint> points, double mmse) {
  if (!(mmse > 0)) throw InvalidArgument("convexity_check needs a positive MMSE");
  std::map<double, std::vector<std::pair<double, double>>> by_T, by_delta;
  for (const auto& p : points) {
    by_T[static_cast<double>(p.T)].emplace_back(p.r_agg, p.mse / mmse);
    by_delta[p.delta].emplace_back(static_cast<double>(p.T), p.r_agg);
  }
  SurfaceConvexity out{slices_of(by_T, "T"), slices_of(by_delta, "delta")};
  if (out.fixed_T.slices == 0 && out.fixed_target.slices == 0)
    throw InvalidArgument("convexity_check: no slice has 3 or more envelope points");
  return out;
}

QuadraticFit fit_quadratic(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw InvalidArgument("fit_quadratic needs >= 3 paired points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = x[i];
    A(i, 2) = x[i] * x[i];
    v(i) = y[i];
  }
  const Eigen::Vector3d c = A.colPivHouseholderQr().solve(v);
  const double ss_res = (A * c - v).squaredNorm();
  const double ss_tot = (v.array() - v.mean()).matrix().squaredNorm();
  return {c(0), c(1), c(2), ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0};
}

std::size_t centralized_iterations(const StateEvolution& se, double delta, std::size_t cap) {
  const double mmse = se.mmse();
  double sigma2 = se.initial_sigma2();
  if (se.config().prior.second_moment() - mmse <= delta) return 0;
  for (std::size_t t = 1; t <= cap; ++t) {
    if (se.mse(sigma2) - mmse <= delta) return t;
    sigma2 = se.step(sigma2);
  }
  throw Infeasible("centralized SE does not reach the target within the iteration cap");
}

CornerReport corner_points(const Transitions& tr, double b, std::span<const double> ladder_db, double large_b) {
  const auto& se = tr.se();
  const double mmse = se.mmse();
  CornerReport rep;
  {
    const double delta = se.config().prior.second_moment() - mmse;
    rep.empty_at_signal_power = solve(tr, b, delta).schedule.T() == 0;
  }
  std::vector<double> ladder(ladder_db.begin(), ladder_db.end());
  std::sort(ladder.begin(), ladder.end(), std::greater<>());
  for (double db : ladder) {
    const auto sol = solve(tr, b, emse_from_db(db, mmse));
    rep.ladder_db.push_back(db);
    rep.ladder_T.push_back(sol.schedule.T());
    rep.ladder_r_agg.push_back(sol.schedule.r_agg());
  }
  rep.T_nondecreasing = std::is_sorted(rep.ladder_T.begin(), rep.ladder_T.end());
  rep.r_agg_increasing = std::adjacent_find(rep.ladder_r_agg.begin(), rep.ladder_r_agg.end(),
                                            std::greater_equal<>()) == rep.ladder_r_agg.end();
  if (!ladder.empty()) {
    const double delta = emse_from_db(ladder.back(), mmse);
    rep.centralized_T = centralized_iterations(se, delta);
    rep.expensive_compute_T = solve(tr, large_b, delta).schedule.T();
    rep.matches_centralized = rep.centralized_T == rep.expensive_compute_T;
  }
  return rep;
}

EmseDecayReport emse_decay_check(const RateSchedule& schedule, double theta, std::size_t ratio_window,
                              std::size_t decay_window) {
  const auto& states = schedule.trajectory.states;
  if (states.size() < std::max(ratio_window + 1, decay_window))
    throw InvalidArgument("emse_decay_check: schedule too short for the requested windows");
  EmseDecayReport rep;
  rep.theta = theta;
  for (std::size_t k = states.size() - ratio_window; k < states.size(); ++k) {
    const double ratio = states[k].emse / states[k - 1].emse;
    rep.emse_ratios.push_back(ratio);
    rep.worst_ratio_error = std::max(rep.worst_ratio_error, std::abs(ratio / theta - 1.0));
  }
  for (std::size_t k = states.size() - decay_window; k < states.size(); ++k)
    rep.d_over_emse.push_back(states[k].distortion / states[k].emse);
  rep.d_over_emse_decreasing = std::adjacent_find(rep.d_over_emse.begin(), rep.d_over_emse.end(),
                                                  std::less_equal<>()) == rep.d_over_emse.end();
  return rep;
}

void write_pareto_csv(std::ostream& os, std::span<const ParetoPoint> points, double mmse) {
  os << "b,delta_db,T,R_agg,mse,mse_db_above_mmse\n";
  os.precision(10);
  for (const auto& p : points)
    os << p.b << ',' << emse_db(p.delta, mmse) << ',' << p.T << ',' << p.r_agg << ',' << p.mse << ','
       << emse_db(p.mse - mmse, mmse) << '\n';
}

}  // namespace mpamp

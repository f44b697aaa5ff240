#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpamp/parallel.hpp"
#include "mpamp/rate_scheduler.hpp"

namespace mpamp {

struct ParetoPoint {
  std::size_t T = 0;
  double r_agg = 0.0;
  double mse = 0.0;
  double b = 0.0;
  double delta = 0.0;
  std::vector<double> rates;
};

// Weak dominance: <= in every coordinate and < in at least one.
bool dominates(const ParetoPoint& a, const ParetoPoint& b) noexcept;

enum class Platform { sensor, cloud, gpu, custom };
std::string_view to_string(Platform p) noexcept;
Platform platform_from_string(std::string_view name);

struct PlatformCost {
  Platform platform = Platform::sensor;
  double N = 1000;
  double M = 400;
  double P = 100;
  double custom_b = 1.0;  // only for Platform::custom
};

struct PlatformB {
  double c4 = 0.0;  // computation cost of one iteration
  double c5 = 0.0;  // communication cost per unit coding rate
  double b = 0.0;
};

// Sensor: 32 MHz CPU, 250 kbps radio, costs in seconds. Cloud: 2 GHz CPU at
// $0.03/hour and $0.03/GB. GPU: the cloud case with communication 100x cheaper.
PlatformB platform_b(const PlatformCost& platform);

struct SweepCell {
  double b = 0.0;
  double delta = 0.0;
  std::optional<ParetoPoint> point;
  std::string error;  // why the cell produced no point
};

// One solve per (b, delta). The transition table must be built on a grid
// whose floor serves the smallest delta.
std::vector<SweepCell> sweep(const Transitions& tr, std::span<const double> b_grid,
                             std::span<const double> delta_grid, const SolveOptions& options = {},
                             Parallelism par = {});

std::vector<ParetoPoint> collect_points(std::span<const SweepCell> cells);

// Deduplicates identical points and removes weakly dominated ones; the
// survivors keep their input order.
std::vector<ParetoPoint> pareto_filter(std::span<const ParetoPoint> points);

struct ConvexityReport {
  std::size_t slices = 0;
  std::size_t triples = 0;
  double worst_violation = 0.0;  // max of y_mid - chord(x_mid); <= 0 means convex
  std::string worst_slice;
  bool convex(double tolerance) const noexcept { return worst_violation <= tolerance; }
};

// Chord test on consecutive triples of (x, y) sorted by x.
ConvexityReport convexity_of(std::span<const double> x, std::span<const double> y);

// Slices of the lower envelope of the sweep. fixed_T: MSE (in MMSE units)
// against R_agg for each T. fixed_target: R_agg against T for each delta,
// taking the minimum rate per (T, delta). Slices with < 3 envelope points are
// skipped; throws InvalidArgument when no slice qualifies.
struct SurfaceConvexity {
  ConvexityReport fixed_T;
  ConvexityReport fixed_target;
};
SurfaceConvexity convexity_check(std::span<const ParetoPoint> points, double mmse);

struct QuadraticFit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double r_squared = 0.0;
};

// Least-squares y = c0 + c1 x + c2 x^2.
QuadraticFit fit_quadratic(std::span<const double> x, std::span<const double> y);

struct CornerReport {
  bool empty_at_signal_power = false;  // delta = E[X^2] - MMSE gives no iterations
  std::vector<double> ladder_db;
  std::vector<std::size_t> ladder_T;
  std::vector<double> ladder_r_agg;
  bool T_nondecreasing = false;
  bool r_agg_increasing = false;
  std::size_t centralized_T = 0;  // lossless SE iterations to reach the smallest target
  std::size_t expensive_compute_T = 0;  // DP T at a very large b
  bool matches_centralized = false;
};

// Lossless SE iterations from sigma_1^2 until EMSE <= delta.
std::size_t centralized_iterations(const StateEvolution& se, double delta, std::size_t cap = 10'000);

CornerReport corner_points(const Transitions& tr, double b, std::span<const double> ladder_db,
                           double large_b = 1e6);

struct EmseDecayReport {
  std::vector<double> emse_ratios;  // eps_{t+1}/eps_t, last `ratio_window`
  double theta = 0.0;
  double worst_ratio_error = 0.0;   // max |ratio/theta - 1|
  std::vector<double> d_over_emse;  // D_t/eps_t, last `decay_window`
  bool d_over_emse_decreasing = false;
};

EmseDecayReport emse_decay_check(const RateSchedule& schedule, double theta, std::size_t ratio_window = 3,
                              std::size_t decay_window = 5);

void write_pareto_csv(std::ostream& os, std::span<const ParetoPoint> points, double mmse);

}  // namespace mpamp

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mpamp/parallel.hpp"
#include "mpamp/rate_distortion.hpp"
#include "mpamp/state_evolution.hpp"

namespace mpamp {

struct GridOptions {
  double dsigma_db = 0.01;  // sigma2 resolution
  double dr = 0.05;         // rate resolution (bits)
  double r_max = 16.0;
  // When nonzero, overrides dsigma_db so the grid has exactly this many nodes.
  std::size_t nodes = 0;
};

// sigma2 grid geometric in the excess sigma2 - sigma_inf^2, descending from
// sigma_1^2 (node 0) to the first node whose excess is at most `floor_excess`,
// plus the rate grid {0, dr, ..., r_max}. Spacing in the excess keeps the
// relative resolution constant along the geometric approach to the fixed point.
class DpGrid {
 public:
  DpGrid(const StateEvolution& se, const GridOptions& options, double floor_excess);
  // Floor at half the excess that meets a target EMSE delta.
  static DpGrid for_target(const StateEvolution& se, const GridOptions& options, double delta);

  std::size_t size() const noexcept { return sigma2_.size(); }
  double sigma2(std::size_t i) const { return sigma2_[i]; }
  std::span<const double> sigma2() const noexcept { return sigma2_; }
  std::span<const double> rates() const noexcept { return rates_; }
  double step_db() const noexcept { return step_db_; }
  double dr() const noexcept { return options_.dr; }
  const GridOptions& options() const noexcept { return options_; }
  // Fractional node index of an arbitrary sigma2 (0 at sigma_1^2).
  double position(double sigma2) const noexcept;

 private:
  GridOptions options_;
  double sigma_inf2_ = 0.0;
  double top_db_ = 0.0;
  double step_db_ = 0.0;
  std::vector<double> sigma2_;
  std::vector<double> rates_;
};

// One lossy SE step from every grid node under every nonzero grid rate.
// Independent of the cost weight and the target, so one table serves a sweep.
class Transitions {
 public:
  Transitions(const StateEvolution& se, const RdFamily& rd, DpGrid grid, Parallelism par = {});

  const StateEvolution& se() const noexcept { return *se_; }
  const RdFamily& rd() const noexcept { return *rd_; }
  const DpGrid& grid() const noexcept { return grid_; }
  std::size_t rate_count() const noexcept { return grid_.rates().size(); }

  bool valid(std::size_t i, std::size_t j) const { return mse_[i * rate_count() + j] >= 0.0; }
  double mse(std::size_t i, std::size_t j) const { return mse_[i * rate_count() + j]; }
  double position(std::size_t i, std::size_t j) const { return pos_[i * rate_count() + j]; }

 private:
  const StateEvolution* se_;
  const RdFamily* rd_;
  DpGrid grid_;
  std::vector<double> mse_;  // -1 when the rate is not achievable
  std::vector<double> pos_;
};

enum class Lookup { linear, nearest };

struct SolveOptions {
  int t_max = 60;
  int patience = 3;  // stop after this many horizons without improvement
  Lookup lookup = Lookup::linear;
};

// Cost-to-go layers phi[k][i] (k remaining iterations) and the argmin rate
// index; rate index 0 means the iteration is skipped.
struct DpTable {
  std::vector<std::vector<double>> phi;
  std::vector<std::vector<std::uint16_t>> argrate;

  std::size_t horizons() const noexcept { return phi.empty() ? 0 : phi.size() - 1; }
};

struct RateSchedule {
  std::vector<double> rates;
  Trajectory trajectory;
  double b = 0.0;
  double delta = 0.0;

  std::size_t T() const noexcept { return rates.size(); }
  double r_agg() const noexcept;
  double cost() const noexcept;
};

double cost_of(std::span<const double> rates, double b) noexcept;

struct DpSolution {
  DpTable table;
  RateSchedule schedule;
  double phi_start = 0.0;  // optimal cost at sigma_1^2 on the grid
};

// Optimal coding rates reaching EMSE <= delta. Throws Infeasible when no
// schedule of at most t_max iterations exists on the grid.
DpSolution solve(const Transitions& tr, double b, double delta, const SolveOptions& options = {});

// Continuation value of a layer at an arbitrary (fractional) grid position.
double lookup_phi(std::span<const double> layer, double position, Lookup mode) noexcept;

// Right-hand side of the recursion at node i from layer k-1, recomputed.
// `base` marks the zero-horizon layer, which is evaluated exactly.
double bellman_value(const Transitions& tr, std::span<const double> previous, bool base, std::size_t i, double b,
                     double delta, Lookup mode);

// Coarse-vs-fine comparison of cost-to-go tables.
struct InterpolationReport {
  std::vector<double> errors;  // Phi_interp - Phi_fine, finite entries only
  double p50 = 0.0;
  double p99 = 0.0;
  double max_abs = 0.0;
};

InterpolationReport verify_interpolation(const StateEvolution& se, const RdFamily& rd, const GridOptions& coarse,
                                         double fine_db, double b, double delta, Parallelism par = {});
InterpolationReport summarize_errors(std::vector<double> errors);

struct RatePerturbationReport {
  std::size_t trials = 0;
  std::size_t considered = 0;  // perturbations meeting the optimal EMSE
  std::size_t improved = 0;    // considered with lower aggregate rate
  double min_delta_ragg = 0.0;
  std::vector<double> delta_ragg;

  double fraction_improved() const noexcept {
    return considered == 0 ? 0.0 : static_cast<double>(improved) / static_cast<double>(considered);
  }
};

// Perturbs each rate by beta_t ~ U[-dr/2, dr/2] and keeps perturbations whose
// final EMSE does not exceed the schedule's.
RatePerturbationReport verify_rate_resolution(const StateEvolution& se, const RdFamily& rd,
                                              const RateSchedule& schedule, double dr, std::size_t trials,
                                              std::uint64_t seed);

struct MonotonicityReport {
  bool monotone = true;
  std::vector<std::size_t> violations;  // t where R_{t+1} < R_t (1-based t)
};
MonotonicityReport check_monotone(std::span<const double> rates);

// Mean |(R_{t+1} - R_t) - growth| over the last `window` increments.
double tail_growth_deviation(std::span<const double> rates, double growth, std::size_t window = 5);

}  // namespace mpamp

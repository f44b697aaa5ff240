#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "mpamp/parallel.hpp"
#include "mpamp/rate_scheduler.hpp"
#include "mpamp/state_evolution.hpp"

namespace mpamp {

// Quantized message of node p at iteration t: f^p ~= gamma * bins.
struct NodeMessage {
  std::size_t t = 0;
  std::size_t node = 0;
  double gamma = 0.0;
  std::span<const std::int64_t> bins;
};

struct SimulationOptions {
  std::size_t N = 10'000;
  // Scale on the Onsager coefficient; 0 removes the correction term.
  double onsager_scale = 1.0;
  // Optional observers; called synchronously in node order.
  std::function<void(const NodeMessage&)> message_sink;
  std::function<void(std::size_t t, std::span<const double> fused)> fusion_observer;
};

struct IterationRecord {
  std::size_t t = 0;
  double gamma = 0.0;
  double mse = 0.0;          // ||x_{t+1} - x||^2 / N
  double sigma2_hat = 0.0;   // ||r_t||^2 / M
  double distortion = 0.0;   // mean (Q(f^p) - f^p)^2 over nodes and entries
  double entropy = 0.0;      // empirical bin-index entropy, bits per entry, node average
  double omega = 0.0;        // mean denoiser derivative
};

struct TrialResult {
  std::size_t M = 0;
  std::size_t N = 0;
  std::vector<IterationRecord> records;
};

// One MP-AMP run. gammas[t] is the bin size at iteration t+1; 0 is lossless.
TrialResult run_trial(const SystemConfig& config, std::span<const double> gammas, std::uint64_t seed,
                      const SimulationOptions& options = {});

// Per-iteration prediction of lossy SE with midpoint-reconstruction ECSQ.
struct SePrediction {
  std::vector<double> sigma2;
  std::vector<double> distortion;
  std::vector<double> mse;
};
SePrediction predict(const StateEvolution& se, std::span<const double> gammas);

// gamma_t = u_t * 2 sigma_t / sqrt(P), u_t ~ U[0.2, 0.95], sigma_t from lossy SE.
std::vector<double> random_admissible_bins(const StateEvolution& se, std::size_t T, std::uint64_t seed);

// Largest admissible bin whose midpoint-ECSQ distortion meets each scheduled D_t.
std::vector<double> bins_for_schedule(const StateEvolution& se, const RateSchedule& schedule);

struct EnsembleRow {
  std::size_t t = 0;
  double mean_mse = 0.0;
  double stderr_mse = 0.0;  // NaN when trials < 2
  double predicted_mse = 0.0;
  double gap_db = 0.0;      // 10 log10(mean / predicted)
  double mean_sigma2_hat = 0.0;
  double stderr_sigma2_hat = 0.0;
  double predicted_sigma2 = 0.0;
  double mean_distortion = 0.0;
  double predicted_distortion = 0.0;
  double mean_entropy = 0.0;
};

struct EnsembleResult {
  std::vector<EnsembleRow> rows;
  std::size_t trials = 0;
  bool stderr_defined = false;
  double max_abs_gap_db() const noexcept;
  void write_csv(std::ostream& os) const;
};

EnsembleResult run_ensemble(const StateEvolution& se, std::span<const double> gammas, std::size_t trials,
                            std::uint64_t base_seed, const SimulationOptions& options = {}, Parallelism par = {});

struct ResidualCheck {
  std::vector<double> z_scores;  // (sigma2_hat - sigma2_SE) / standard error
  std::vector<std::size_t> flagged;
  bool ok() const noexcept { return flagged.empty(); }
};

// Compares sigma2_hat with SE's sigma_t^2 and flags deviations beyond
// `limit` standard errors. For one trial the standard error is
// sigma_t^2 sqrt(2/M); for an ensemble it is the empirical one.
ResidualCheck residual_variance_check(const TrialResult& trial, const SePrediction& prediction, double limit = 3.0);
ResidualCheck residual_variance_check(const EnsembleResult& ensemble, double limit = 3.0);

}  // namespace mpamp

#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "mpamp/rate_distortion.hpp"
#include "mpamp/signal_model.hpp"

namespace mpamp {

// Problem instance: measurement rate kappa = M/N, noise variance, node count.
struct SystemConfig {
  Prior prior = Prior::bernoulli_gaussian(0.1);
  double kappa = 0.4;
  double sigma_z2 = 0.0025;
  int P = 100;

  void validate() const;
  // sigma_1^2 = sigma_Z^2 + E[X^2]/kappa (all-zero initial estimate).
  double initial_sigma2() const { return sigma_z2 + prior.second_moment() / kappa; }
};

struct FixedPoint {
  double sigma_inf2 = 0.0;
  double mmse = 0.0;
  double theta = 0.0;
  double growth = 0.0;  // 0.5 log2(1/theta), bits per iteration
  std::size_t iterations = 0;
};

double se_step(const SystemConfig& config, double sigma2);
double lossy_se_step(const SystemConfig& config, double sigma2, double D);
FixedPoint fixed_point(const SystemConfig& config);

double emse_db(double emse, double mmse) noexcept;
// Inverse of emse_db: the absolute EMSE that is `db` above the MMSE.
double emse_from_db(double db, double mmse) noexcept;

// SE engine with a cached spline of the denoiser MSE. The spline covers
// every argument sigma2 + P*D reachable from sigma_1^2 and agrees with the
// direct quadrature to ~1e-10 relative; outside it the quadrature is used.
class StateEvolution {
 public:
  explicit StateEvolution(SystemConfig config);
  ~StateEvolution();
  StateEvolution(StateEvolution&&) noexcept;
  StateEvolution& operator=(StateEvolution&&) noexcept;

  const SystemConfig& config() const noexcept { return config_; }
  const FixedPoint& fixed_point() const noexcept { return fp_; }
  double initial_sigma2() const noexcept { return sigma1_; }
  double mmse() const noexcept { return fp_.mmse; }

  double mse(double sigma2) const;
  double mse_exact(double sigma2) const { return denoiser_mse(config_.prior, sigma2); }
  double step(double sigma2) const { return config_.sigma_z2 + mse(sigma2) / config_.kappa; }
  double lossy_step(double sigma2, double D) const {
    return config_.sigma_z2 + mse(sigma2 + config_.P * D) / config_.kappa;
  }
  double table_lo() const noexcept;
  double table_hi() const noexcept;

 private:
  struct Table;
  SystemConfig config_;
  FixedPoint fp_;
  double sigma1_ = 0.0;
  std::unique_ptr<Table> table_;
};

struct SEState {
  std::size_t t = 0;
  double rate = 0.0;
  double distortion = 0.0;
  double sigma2 = 0.0;
  double mse = 0.0;
  double emse = 0.0;
};

struct Trajectory {
  std::vector<SEState> states;
  double mmse = 0.0;
  double initial_mse = 0.0;  // E[X^2], the all-zero estimate
  double initial_sigma2 = 0.0;

  double final_mse() const noexcept { return states.empty() ? initial_mse : states.back().mse; }
  double final_emse() const noexcept { return final_mse() - mmse; }
  // Row t = 0 is the all-zero starting estimate.
  void write_csv(std::ostream& os) const;
};

// Lossy SE under a coding-rate schedule. A zero rate skips the iteration
// (nothing is computed or sent, so the state is unchanged); +inf is lossless.
Trajectory run_schedule(const StateEvolution& se, std::span<const double> rates, const RdFamily& rd);

// Lossy SE with explicit per-iteration distortions.
Trajectory run_distortions(const StateEvolution& se, std::span<const double> distortions);

}  // namespace mpamp

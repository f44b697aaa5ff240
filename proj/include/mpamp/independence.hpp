#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mpamp/parallel.hpp"
#include "mpamp/signal_model.hpp"

namespace mpamp {

struct PccResult {
  double r = 0.0;
  double p_value = 1.0;
  bool reject = false;  // p < alpha
};

// Pearson correlation with a two-sided p-value from Student's t on n - 2
// degrees of freedom. Throws InvalidArgument for n < 8, unequal lengths or a
// constant input.
PccResult pcc_test(std::span<const double> u, std::span<const double> v, double alpha = 0.05);

struct IndependenceGrid {
  std::vector<double> gammas;  // quantizer bin sizes
  std::vector<double> sigmas;  // per-node noise standard deviations
  std::size_t trials = 100;
  std::size_t N = 10'000;
  double P = 100;

  // gamma = 2^0 .. 2^-10, sigma = 10^-0.5 .. 10^-4 in half decades.
  static IndependenceGrid standard();
};

struct IndependenceCell {
  double gamma = 0.0;
  double sigma = 0.0;
  double reject_wn = 0.0;   // fraction rejecting corr(w, n) = 0
  double reject_wnx = 0.0;  // fraction rejecting corr(w + n, x) = 0
  bool degenerate = false;  // some trial had a vanishing quantization error
  bool admissible() const noexcept { return gamma < 2.0 * sigma; }
};

struct IndependenceResult {
  std::vector<IndependenceCell> cells;  // sigma-major
  std::size_t gamma_count = 0;
  const IndependenceCell& at(std::size_t sigma_index, std::size_t gamma_index) const {
    return cells[sigma_index * gamma_count + gamma_index];
  }
  void write_csv(std::ostream& os) const;
};

// Per trial: f^p = x/P + w^p at every node, midpoint quantization with bin
// gamma, then the fused w = sum w^p and n = sum (Q(f^p) - f^p) are tested.
IndependenceResult rejection_grid(const Prior& prior, const IndependenceGrid& grid, std::uint64_t seed,
                                  Parallelism par = {});

struct CalibrationResult {
  std::size_t tests = 0;
  double mean_rejection = 0.0;
};

// The test applied to independent Gaussian pairs of length N, `cells * trials` times.
CalibrationResult calibrate(std::size_t cells, std::size_t trials, std::size_t N, std::uint64_t seed,
                            Parallelism par = {});

}  // namespace mpamp

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mpamp/parallel.hpp"
#include "mpamp/signal_model.hpp"

namespace mpamp {

// A scalar source given as a Gaussian mixture with strictly positive
// component variances.
struct SourceMixture {
  std::vector<GaussianComponent> components;

  double mean() const noexcept;
  double variance() const noexcept;
  double min_sd() const noexcept;
  double max_sd() const noexcept;
  double density(double x) const noexcept;
  // Differential entropy in bits.
  double entropy_bits() const;
};

// Per-node message x/P + w^p with w^p ~ N(0, sigma2/P).
SourceMixture node_source(const Prior& prior, double sigma2, int P);

// The same source rescaled to unit noise variance: a*X + N(0, 1) with
// a = 1/sqrt(P*sigma2). Distortions scale back by sigma2/P.
SourceMixture normalized_node_source(const Prior& prior, double sigma2, int P);

enum class Reconstruction { centroid, midpoint };

struct QuantizerSpec {
  double gamma = 1.0;
  Reconstruction reconstruction = Reconstruction::centroid;
};

struct RatePoint {
  double rate = 0.0;        // bits per entry
  double distortion = 0.0;  // expected squared error
};

// Uniform midtread quantizer, bins [(k - 1/2)gamma, (k + 1/2)gamma).
RatePoint ecsq_point(const SourceMixture& source, const QuantizerSpec& q);

// Validity region of the quantization-noise model.
bool bin_size_admissible(double gamma, double sigma2, int P) noexcept;

double gaussian_highrate_rate(double D, double C1);
double gaussian_highrate_distortion(double R, double C1);

struct BlahutArimotoResult {
  double rate = 0.0;  // bits
  double distortion = 0.0;
  std::size_t iterations = 0;
  std::vector<double> output_pmf;
};

// One point of the RD curve at Lagrange slope s <= 0 (nats per unit
// distortion). distortion is row-major, source size x reproduction size.
// `init` optionally warm-starts the reproduction distribution.
BlahutArimotoResult blahut_arimoto(std::span<const double> pmf, std::span<const double> distortion,
                                   std::size_t outputs, double s,
                                   std::span<const double> init = {});

// Monotone tabulated curve; piecewise linear in (R, ln D). No extrapolation.
class RdCurve {
 public:
  RdCurve() = default;
  // Points are sorted by rate; non-monotone points are dropped.
  explicit RdCurve(std::vector<RatePoint> points);

  std::span<const RatePoint> knots() const noexcept { return knots_; }
  double min_rate() const noexcept { return knots_.front().rate; }
  double max_rate() const noexcept { return knots_.back().rate; }
  double max_distortion() const noexcept { return knots_.front().distortion; }
  double min_distortion() const noexcept { return knots_.back().distortion; }
  bool contains_rate(double R) const noexcept { return R >= min_rate() && R <= max_rate(); }

  double distortion_for_rate(double R) const;
  double rate_for_distortion(double D) const;

  void write_csv(std::ostream& os) const;

 private:
  std::vector<RatePoint> knots_;
};

enum class RdKind { gaussian_highrate, blahut_arimoto, ecsq };

std::string_view to_string(RdKind kind) noexcept;
RdKind rd_kind_from_string(std::string_view name);

struct RdOptions {
  RdKind kind = RdKind::blahut_arimoto;
  // Restrict ECSQ to bins gamma < 2 sigma / sqrt(P).
  bool bin_constraint = false;
  Reconstruction reconstruction = Reconstruction::centroid;
  // Curves are tabulated up to this rate (bits).
  double max_rate = 17.0;
  // Anchor spacing of the family along sigma2.
  double anchor_db = 0.25;
  std::size_t ba_points = 101;
};

// Single-state RD curve for the per-node source at channel variance sigma2.
RdCurve build_rd_curve(const Prior& prior, double sigma2, int P, const RdOptions& options);

// RD curves indexed by the channel variance, interpolated in ln D along
// sigma2 (dB) at fixed rate. Immutable once built.
class RdFamily {
 public:
  RdFamily(const Prior& prior, int P, double sigma2_lo, double sigma2_hi, const RdOptions& options,
           Parallelism par = {});

  const RdOptions& options() const noexcept { return options_; }
  double sigma2_lo() const noexcept { return anchors_.front(); }
  double sigma2_hi() const noexcept { return anchors_.back(); }
  std::span<const double> anchors() const noexcept { return anchors_; }
  const RdCurve& curve(std::size_t i) const { return curves_.at(i); }

  // Node distortion at rate R (bits) when the channel variance is sigma2.
  // R = +inf means lossless (D = 0). Throws outside the tabulated range.
  double distortion(double sigma2, double R) const;
  // nullopt when R is not achievable (below the constrained ECSQ minimum).
  std::optional<double> try_distortion(double sigma2, double R) const;

 private:
  RdOptions options_;
  std::vector<double> anchors_;
  std::vector<RdCurve> curves_;
};

}  // namespace mpamp

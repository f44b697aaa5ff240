#include "mpamp/simulator.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "mpamp/errors.hpp"
#include "mpamp/rng.hpp"

namespace mpamp {

namespace {

double quantize(double f, double gamma, std::int64_t& bin) {
  if (gamma == 0.0) {
    bin = 0;
    return f;
  }
  bin = static_cast<std::int64_t>(std::nearbyint(f / gamma));
  return gamma * static_cast<double>(bin);
}

double entropy_bits(std::vector<std::int64_t>& bins) {
  std::sort(bins.begin(), bins.end());
  const double n = static_cast<double>(bins.size());
  double h = 0.0;
  for (std::size_t i = 0; i < bins.size();) {
    std::size_t j = i;
    while (j < bins.size() && bins[j] == bins[i]) ++j;
    const double p = static_cast<double>(j - i) / n;
    h -= p * std::log2(p);
    i = j;
  }
  return h;
}

std::size_t measurements(const SystemConfig& config, std::size_t N) {
  const double m = config.kappa * static_cast<double>(N);
  const auto M = static_cast<std::size_t>(std::llround(m));
  if (M == 0 || std::abs(m - static_cast<double>(M)) > 1e-9 * m) {
    std::ostringstream os;
    os << "kappa * N = " << m << " is not a positive integer";
    throw InvalidArgument(os.str());
  }
  if (M % static_cast<std::size_t>(config.P) != 0) {
    std::ostringstream os;
    os << "P = " << config.P << " does not divide M = " << M;
    throw InvalidArgument(os.str());
  }
  return M;
}

}  // namespace

TrialResult run_trial(const SystemConfig& config, std::span<const double> gammas, std::uint64_t seed,
                      const SimulationOptions& options) {
  config.validate();
  const std::size_t N = options.N;
  if (N == 0) throw InvalidArgument("signal length must be positive");
  if (gammas.empty()) throw InvalidArgument("need at least one iteration");
  for (double g : gammas)
    if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidArgument("bin sizes must be finite and nonnegative");
  const std::size_t M = measurements(config, N);
  const auto P = static_cast<std::size_t>(config.P);
  const std::size_t rows = M / P;
  const double inv_kappa = 1.0 / config.kappa;

  std::vector<double> x(N);
  {
    auto rng = make_stream(seed, {1});
    for (auto& v : x) v = config.prior.sample(rng);
  }
  std::vector<float> A(M * N);
  std::vector<double> y(M);
  {
    const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(M)));
    boost::random::normal_distribution<float> g(0.0f, 1.0f);
    for (std::size_t p = 0; p < P; ++p) {
      auto rng = make_stream(seed, {3, p});
      float* block = &A[p * rows * N];
      for (std::size_t k = 0; k < rows * N; ++k) block[k] = scale * g(rng);
    }
    auto rng = make_stream(seed, {2});
    boost::random::normal_distribution<double> noise(0.0, std::sqrt(config.sigma_z2));
    for (std::size_t i = 0; i < M; ++i) {
      const float* row = &A[i * N];
      double acc = 0.0;
      for (std::size_t j = 0; j < N; ++j) acc += static_cast<double>(row[j]) * x[j];
      y[i] = acc + noise(rng);
    }
  }

  TrialResult result;
  result.M = M;
  result.N = N;
  std::vector<double> xt(N, 0.0), r(M, 0.0), r_prev(M, 0.0), fq(N), fp(N);
  std::vector<std::int64_t> bins(N), scratch(N);
  double omega_prev = 0.0;
  for (std::size_t t = 0; t < gammas.size(); ++t) {
    const double gamma = gammas[t];
    const double onsager = t == 0 ? 0.0 : options.onsager_scale * inv_kappa * omega_prev;
    for (std::size_t i = 0; i < M; ++i) {
      const float* row = &A[i * N];
      double acc = 0.0;
      for (std::size_t j = 0; j < N; ++j) acc += static_cast<double>(row[j]) * xt[j];
      r[i] = y[i] - acc + onsager * r_prev[i];
    }
    std::fill(fq.begin(), fq.end(), 0.0);
    double dist = 0.0;
    double entropy = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t j = 0; j < N; ++j) fp[j] = xt[j] / static_cast<double>(P);
      for (std::size_t i = p * rows; i < (p + 1) * rows; ++i) {
        const float* row = &A[i * N];
        const double ri = r[i];
        for (std::size_t j = 0; j < N; ++j) fp[j] += static_cast<double>(row[j]) * ri;
      }
      for (std::size_t j = 0; j < N; ++j) {
        const double q = quantize(fp[j], gamma, bins[j]);
        dist += (q - fp[j]) * (q - fp[j]);
        fq[j] += q;
      }
      if (options.message_sink) options.message_sink({t + 1, p, gamma, bins});
      if (gamma > 0.0) {
        scratch = bins;
        entropy += entropy_bits(scratch);
      }
    }
    if (options.fusion_observer) options.fusion_observer(t + 1, fq);

    double rr = 0.0;
    for (double v : r) rr += v * v;
    const double sigma2_hat = rr / static_cast<double>(M);
    // Quantization adds about P gamma^2 / 12 to the fused channel noise.
    const double s2 = sigma2_hat + static_cast<double>(P) * gamma * gamma / 12.0;
    double omega = 0.0;
    double err = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const auto d = denoise(config.prior, fq[j], s2);
      xt[j] = d.estimate;
      omega += d.derivative;
      err += (d.estimate - x[j]) * (d.estimate - x[j]);
    }
    omega /= static_cast<double>(N);
    std::swap(r, r_prev);
    omega_prev = omega;

    IterationRecord rec;
    rec.t = t + 1;
    rec.gamma = gamma;
    rec.mse = err / static_cast<double>(N);
    rec.sigma2_hat = sigma2_hat;
    rec.distortion = dist / static_cast<double>(N * P);
    rec.entropy = entropy / static_cast<double>(P);
    rec.omega = omega;
    result.records.push_back(rec);
  }
  return result;
}

SePrediction predict(const StateEvolution& se, std::span<const double> gammas) {
  const auto& cfg = se.config();
  SePrediction out;
  double sigma2 = se.initial_sigma2();
  for (double gamma : gammas) {
    const double d =
        gamma > 0.0 ? ecsq_point(node_source(cfg.prior, sigma2, cfg.P), {gamma, Reconstruction::midpoint}).distortion
                    : 0.0;
    const double mse = se.mse(sigma2 + cfg.P * d);
    out.sigma2.push_back(sigma2);
    out.distortion.push_back(d);
    out.mse.push_back(mse);
    sigma2 = cfg.sigma_z2 + mse / cfg.kappa;
  }
  return out;
}

std::vector<double> random_admissible_bins(const StateEvolution& se, std::size_t T, std::uint64_t seed) {
  const auto& cfg = se.config();
  auto rng = make_stream(seed, {0xB1});
  std::uniform_real_distribution<double> u(0.2, 0.95);
  std::vector<double> gammas;
  double sigma2 = se.initial_sigma2();
  for (std::size_t t = 0; t < T; ++t) {
    const double gamma = u(rng) * 2.0 * std::sqrt(sigma2 / cfg.P);
    gammas.push_back(gamma);
    const double d = ecsq_point(node_source(cfg.prior, sigma2, cfg.P), {gamma, Reconstruction::midpoint}).distortion;
    sigma2 = cfg.sigma_z2 + se.mse(sigma2 + cfg.P * d) / cfg.kappa;
  }
  return gammas;
}

std::vector<double> bins_for_schedule(const StateEvolution& se, const RateSchedule& schedule) {
  const auto& cfg = se.config();
  std::vector<double> gammas;
  for (const auto& st : schedule.trajectory.states) {
    if (st.rate == 0.0) throw InvalidArgument("skipped iterations cannot be simulated");
    if (st.distortion == 0.0) {
      gammas.push_back(0.0);
      continue;
    }
    const auto src = node_source(cfg.prior, st.sigma2, cfg.P);
    auto dist = [&](double g) { return ecsq_point(src, {g, Reconstruction::midpoint}).distortion; };
    double hi = 2.0 * std::sqrt(st.sigma2 / cfg.P) * (1.0 - 1e-9);
    if (dist(hi) <= st.distortion) {
      gammas.push_back(hi);
      continue;
    }
    double lo = hi * 1e-6;
    for (int it = 0; it < 100 && hi / lo > 1.0 + 1e-12; ++it) {
      const double mid = std::sqrt(lo * hi);
      (dist(mid) <= st.distortion ? lo : hi) = mid;
    }
    gammas.push_back(lo);
  }
  return gammas;
}

double EnsembleResult::max_abs_gap_db() const noexcept {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, std::abs(r.gap_db));
  return m;
}

void EnsembleResult::write_csv(std::ostream& os) const {
  os << "t,mean_mse,stderr_mse,predicted_mse,gap_db,mean_sigma2_hat,predicted_sigma2,mean_distortion,"
        "predicted_distortion,mean_entropy_bits\n";
  const auto precision = os.precision(17);
  for (const auto& r : rows)
    os << r.t << ',' << r.mean_mse << ',' << r.stderr_mse << ',' << r.predicted_mse << ',' << r.gap_db << ','
       << r.mean_sigma2_hat << ',' << r.predicted_sigma2 << ',' << r.mean_distortion << ','
       << r.predicted_distortion << ',' << r.mean_entropy << '\n';
  os.precision(precision);
}

EnsembleResult run_ensemble(const StateEvolution& se, std::span<const double> gammas, std::size_t trials,
                            std::uint64_t base_seed, const SimulationOptions& options, Parallelism par) {
  if (trials == 0) throw InvalidArgument("need at least one trial");
  std::vector<TrialResult> results(trials);
  parallel_for(trials, par, [&](std::size_t k) {
    results[k] = run_trial(se.config(), gammas, derive_seed(base_seed, {k}), options);
  });
  const auto pred = predict(se, gammas);
  EnsembleResult out;
  out.trials = trials;
  out.stderr_defined = trials >= 2;
  const double n = static_cast<double>(trials);
  for (std::size_t t = 0; t < gammas.size(); ++t) {
    EnsembleRow row;
    row.t = t + 1;
    double s = 0.0, ss = 0.0, h = 0.0, hh = 0.0;
    for (const auto& r : results) {
      const auto& rec = r.records[t];
      s += rec.mse;
      ss += rec.mse * rec.mse;
      h += rec.sigma2_hat;
      hh += rec.sigma2_hat * rec.sigma2_hat;
      row.mean_distortion += rec.distortion / n;
      row.mean_entropy += rec.entropy / n;
    }
    row.mean_mse = s / n;
    row.mean_sigma2_hat = h / n;
    if (out.stderr_defined) {
      row.stderr_mse = std::sqrt(std::max(0.0, (ss - s * s / n) / (n - 1.0)) / n);
      row.stderr_sigma2_hat = std::sqrt(std::max(0.0, (hh - h * h / n) / (n - 1.0)) / n);
    } else {
      row.stderr_mse = row.stderr_sigma2_hat = std::numeric_limits<double>::quiet_NaN();
    }
    row.predicted_mse = pred.mse[t];
    row.predicted_sigma2 = pred.sigma2[t];
    row.predicted_distortion = pred.distortion[t];
    row.gap_db = 10.0 * std::log10(row.mean_mse / row.predicted_mse);
    out.rows.push_back(row);
  }
  return out;
}

ResidualCheck residual_variance_check(const TrialResult& trial, const SePrediction& prediction, double limit) {
  ResidualCheck c;
  for (std::size_t t = 0; t < trial.records.size() && t < prediction.sigma2.size(); ++t) {
    const double s2 = prediction.sigma2[t];
    const double se = s2 * std::sqrt(2.0 / static_cast<double>(trial.M));
    const double z = (trial.records[t].sigma2_hat - s2) / se;
    c.z_scores.push_back(z);
    if (std::abs(z) > limit) c.flagged.push_back(t + 1);
  }
  return c;
}

ResidualCheck residual_variance_check(const EnsembleResult& ensemble, double limit) {
  if (!ensemble.stderr_defined) throw InvalidArgument("residual check needs at least two trials");
  ResidualCheck c;
  for (const auto& r : ensemble.rows) {
    const double z = (r.mean_sigma2_hat - r.predicted_sigma2) / r.stderr_sigma2_hat;
    c.z_scores.push_back(z);
    if (!(std::abs(z) <= limit)) c.flagged.push_back(r.t);
  }
  return c;
}

}  // namespace mpamp

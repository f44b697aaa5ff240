#include "mpamp/rate_distortion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mpamp/errors.hpp"
#include "mpamp/quadrature.hpp"

namespace mpamp {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kLn2 = std::numbers::ln2;

double std_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// P(alpha < Z < beta) for Z ~ N(0, 1), accurate in both tails.
double std_mass(double alpha, double beta) {
  constexpr double r = std::numbers::sqrt2;
  if (alpha >= 0.0) return 0.5 * (std::erfc(alpha / r) - std::erfc(beta / r));
  if (beta <= 0.0) return 0.5 * (std::erfc(-beta / r) - std::erfc(-alpha / r));
  return 1.0 - 0.5 * std::erfc(beta / r) - 0.5 * std::erfc(-alpha / r);
}

double log_density(std::span<const GaussianComponent> comps, double x) {
  double best = -std::numeric_limits<double>::infinity();
  double terms[16];
  std::vector<double> heap;
  double* t = terms;
  if (comps.size() > 16) {
    heap.resize(comps.size());
    t = heap.data();
  }
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const auto& c = comps[k];
    const double d = x - c.mean;
    t[k] = std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * c.variance) - 0.5 * d * d / c.variance;
    best = std::max(best, t[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < comps.size(); ++k) sum += std::exp(t[k] - best);
  return best + std::log(sum);
}

}  // namespace

double SourceMixture::mean() const noexcept {
  double m = 0.0;
  for (const auto& c : components) m += c.weight * c.mean;
  return m;
}

double SourceMixture::variance() const noexcept {
  double m2 = 0.0;
  for (const auto& c : components) m2 += c.weight * (c.mean * c.mean + c.variance);
  const double m = mean();
  return m2 - m * m;
}

double SourceMixture::min_sd() const noexcept {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& c : components) v = std::min(v, c.variance);
  return std::sqrt(v);
}

double SourceMixture::max_sd() const noexcept {
  double v = 0.0;
  for (const auto& c : components) v = std::max(v, c.variance);
  return std::sqrt(v);
}

double SourceMixture::density(double x) const noexcept {
  double p = 0.0;
  for (const auto& c : components) {
    const double s = std::sqrt(c.variance);
    p += c.weight * std_pdf((x - c.mean) / s) / s;
  }
  return p;
}

double SourceMixture::entropy_bits() const {
  double h = 0.0;
  for (const auto& c : components) {
    h -= c.weight * quad::gaussian_expectation([&](double x) { return log_density(components, x); }, c.mean,
                                               c.variance, 121);
  }
  return h / kLn2;
}

SourceMixture node_source(const Prior& prior, double sigma2, int P) {
  if (!(sigma2 > 0.0) || P < 1) throw InvalidArgument("node source needs sigma2 > 0 and P >= 1");
  SourceMixture s;
  const double noise = sigma2 / P;
  for (auto c : prior.scaled(1.0 / P)) {
    c.variance += noise;
    s.components.push_back(c);
  }
  return s;
}

SourceMixture normalized_node_source(const Prior& prior, double sigma2, int P) {
  if (!(sigma2 > 0.0) || P < 1) throw InvalidArgument("node source needs sigma2 > 0 and P >= 1");
  SourceMixture s;
  for (auto c : prior.scaled(1.0 / std::sqrt(P * sigma2))) {
    c.variance += 1.0;
    s.components.push_back(c);
  }
  return s;
}

bool bin_size_admissible(double gamma, double sigma2, int P) noexcept {
  return gamma > 0.0 && gamma < 2.0 * std::sqrt(sigma2 / P);
}

RatePoint ecsq_point(const SourceMixture& source, const QuantizerSpec& q) {
  const double gamma = q.gamma;
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    std::ostringstream os;
    os << "quantizer bin size must be positive and finite, got " << gamma;
    throw InvalidArgument(os.str());
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& c : source.components) {
    const double s = std::sqrt(c.variance);
    lo = std::min(lo, c.mean - 12.0 * s);
    hi = std::max(hi, c.mean + 12.0 * s);
  }
  const auto k_lo = static_cast<long long>(std::floor(lo / gamma + 0.5));
  const auto k_hi = static_cast<long long>(std::floor(hi / gamma + 0.5));
  if (k_hi - k_lo > 20'000'000) throw InvalidArgument("quantizer bin size too small for the source scale");

  const auto& gl = quad::gauss_legendre(8);
  const double half = 0.5 * gamma;
  double entropy = 0.0;
  double distortion = 0.0;
  double total = 0.0;
  for (long long k = k_lo; k <= k_hi; ++k) {
    const double center = static_cast<double>(k) * gamma;
    const double a = center - half;
    const double b = center + half;
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (const auto& c : source.components) {
      const double s = std::sqrt(c.variance);
      if (gamma < 0.5 * s) {
        // Narrow bin: the closed form cancels catastrophically.
        double c0 = 0.0, c1 = 0.0, c2 = 0.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
          const double u = half * gl.nodes[i];
          const double p = gl.weights[i] * half * std_pdf((center + u - c.mean) / s) / s;
          c0 += p;
          c1 += p * u;
          c2 += p * u * u;
        }
        m0 += c.weight * c0;
        m1 += c.weight * c1;
        m2 += c.weight * c2;
      } else {
        const double alpha = (a - c.mean) / s;
        const double beta = (b - c.mean) / s;
        const double pa = std_pdf(alpha);
        const double pb = std_pdf(beta);
        const double mass = std_mass(alpha, beta);
        const double a1 = s * (pa - pb);
        const double a2 = c.variance * (mass + alpha * pa - beta * pb);
        const double delta = c.mean - center;
        m0 += c.weight * mass;
        m1 += c.weight * (a1 + delta * mass);
        m2 += c.weight * (a2 + 2.0 * delta * a1 + delta * delta * mass);
      }
    }
    total += m0;
    if (m0 > 0.0) {
      entropy -= m0 * std::log2(m0);
      distortion += q.reconstruction == Reconstruction::centroid ? std::max(0.0, m2 - m1 * m1 / m0) : m2;
    }
  }
  const double tail = std::abs(1.0 - total);
  if (tail > 1e-12) {
    std::ostringstream os;
    os << "entropy series truncated with tail mass " << tail;
    throw NumericalError(os.str(), tail);
  }
  return {std::max(0.0, entropy), distortion};
}

double gaussian_highrate_rate(double D, double C1) {
  if (!(C1 > 0.0) || !(D > 0.0) || D > C1) {
    std::ostringstream os;
    os << "high-rate model needs 0 < D <= C1, got D = " << D << ", C1 = " << C1;
    throw InvalidArgument(os.str());
  }
  return 0.5 * std::log2(C1 / D);
}

double gaussian_highrate_distortion(double R, double C1) {
  if (!(C1 > 0.0) || !(R >= 0.0)) throw InvalidArgument("high-rate model needs C1 > 0 and R >= 0");
  return C1 * std::exp2(-2.0 * R);
}

BlahutArimotoResult blahut_arimoto(std::span<const double> pmf, std::span<const double> distortion,
                                   std::size_t outputs, double s, std::span<const double> init) {
  const std::size_t n = pmf.size();
  const std::size_t m = outputs;
  if (n == 0 || m == 0 || distortion.size() != n * m) throw InvalidArgument("distortion matrix shape mismatch");
  if (!(s <= 0.0)) throw InvalidArgument("Lagrange slope must be nonpositive");
  double mass = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0)) throw InvalidArgument("source pmf must be nonnegative");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw InvalidArgument("source pmf must sum to 1");
  for (double d : distortion)
    if (!(d >= 0.0)) throw InvalidArgument("distortion matrix must be nonnegative");

  BlahutArimotoResult out;
  if (s == 0.0) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < m; ++y) {
      double d = 0.0;
      for (std::size_t x = 0; x < n; ++x) d += pmf[x] * distortion[x * m + y];
      if (d < best_d) {
        best_d = d;
        best = y;
      }
    }
    out.distortion = best_d;
    out.output_pmf.assign(m, 0.0);
    out.output_pmf[best] = 1.0;
    return out;
  }

  std::vector<double> e(n * m);
  for (std::size_t i = 0; i < n * m; ++i) e[i] = std::exp(s * distortion[i]);
  std::vector<double> q(m, 1.0 / static_cast<double>(m));
  if (init.size() == m) q.assign(init.begin(), init.end());
  std::vector<double> z(n), c(m);

  constexpr std::size_t kMaxIterations = 100'000;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= kMaxIterations; ++it) {
    for (std::size_t x = 0; x < n; ++x) {
      const double* row = &e[x * m];
      double acc = 0.0;
      for (std::size_t y = 0; y < m; ++y) acc += q[y] * row[y];
      z[x] = acc;
    }
    std::fill(c.begin(), c.end(), 0.0);
    double dist = 0.0;
    double log_z = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (pmf[x] == 0.0) continue;
      const double scale = pmf[x] / z[x];
      const double* row = &e[x * m];
      const double* drow = &distortion[x * m];
      for (std::size_t y = 0; y < m; ++y) {
        const double t = scale * row[y];
        c[y] += t;
        dist += t * q[y] * drow[y];
      }
      log_z += pmf[x] * std::log(z[x]);
    }
    double cross = 0.0;
    for (std::size_t y = 0; y < m; ++y) {
      const double qn = q[y] * c[y];
      if (qn > 0.0) cross += qn * std::log(c[y]);
      q[y] = qn;
    }
    const double info = std::max(0.0, (s * dist - log_z - cross) / kLn2);
    out.distortion = dist;
    out.rate = info;
    out.iterations = it;
    if (std::abs(info - previous) < 1e-10) {
      out.output_pmf = std::move(q);
      return out;
    }
    previous = info;
  }
  std::ostringstream os;
  os << "Blahut-Arimoto did not converge in " << kMaxIterations << " iterations at slope " << s;
  throw NumericalError(os.str());
}

RdCurve::RdCurve(std::vector<RatePoint> points) {
  std::stable_sort(points.begin(), points.end(),
                   [](const RatePoint& a, const RatePoint& b) { return a.rate < b.rate; });
  for (const auto& p : points) {
    if (!(p.rate >= 0.0) || !(p.distortion > 0.0) || !std::isfinite(p.rate)) continue;
    if (!knots_.empty() && (p.rate <= knots_.back().rate || p.distortion >= knots_.back().distortion)) continue;
    knots_.push_back(p);
  }
  if (knots_.size() < 2) throw InvalidArgument("RD curve needs at least two monotone knots");
}

double RdCurve::distortion_for_rate(double R) const {
  if (!contains_rate(R)) {
    std::ostringstream os;
    os << "rate " << R << " outside the tabulated range [" << min_rate() << ", " << max_rate() << "]";
    throw InvalidArgument(os.str());
  }
  auto it = std::lower_bound(knots_.begin(), knots_.end(), R,
                             [](const RatePoint& k, double r) { return k.rate < r; });
  if (it->rate == R) return it->distortion;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double w = (R - a.rate) / (b.rate - a.rate);
  return std::exp((1.0 - w) * std::log(a.distortion) + w * std::log(b.distortion));
}

double RdCurve::rate_for_distortion(double D) const {
  if (!(D >= min_distortion() && D <= max_distortion())) {
    std::ostringstream os;
    os << "distortion " << D << " outside the tabulated range [" << min_distortion() << ", " << max_distortion()
       << "]";
    throw InvalidArgument(os.str());
  }
  // Distortion decreases along the knots.
  auto it = std::lower_bound(knots_.begin(), knots_.end(), D,
                             [](const RatePoint& k, double d) { return k.distortion > d; });
  if (it->distortion == D) return it->rate;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double w = (std::log(D) - std::log(a.distortion)) / (std::log(b.distortion) - std::log(a.distortion));
  return a.rate + w * (b.rate - a.rate);
}

void RdCurve::write_csv(std::ostream& os) const {
  os << "rate_bits,distortion\n";
  const auto precision = os.precision(17);
  for (const auto& k : knots_) os << k.rate << ',' << k.distortion << '\n';
  os.precision(precision);
}

std::string_view to_string(RdKind kind) noexcept {
  switch (kind) {
    case RdKind::gaussian_highrate:
      return "gaussian_highrate";
    case RdKind::blahut_arimoto:
      return "blahut_arimoto";
    case RdKind::ecsq:
      return "ecsq";
  }
  return "?";
}

RdKind rd_kind_from_string(std::string_view name) {
  if (name == "gaussian_highrate") return RdKind::gaussian_highrate;
  if (name == "blahut_arimoto") return RdKind::blahut_arimoto;
  if (name == "ecsq") return RdKind::ecsq;
  throw InvalidArgument("unknown RD model '" + std::string(name) +
                        "' (expected gaussian_highrate, blahut_arimoto or ecsq)");
}

namespace {

// R(D) of a unit-noise source: Blahut-Arimoto for D > 1 and the Shannon lower
// bound below, where it is tight because the source contains N(0, 1).
std::vector<RatePoint> shannon_curve(const SourceMixture& src, const RdOptions& options) {
  const double var = src.variance();
  const double h = src.entropy_bits();
  const double slb_at_one = h - 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e);
  std::vector<RatePoint> pts{{0.0, var}};
  pts.push_back({slb_at_one, 1.0});
  pts.push_back({options.max_rate, std::exp2(2.0 * (slb_at_one - options.max_rate))});

  if (var / 1.02 > 1.08) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : src.components) {
      const double sd = std::sqrt(c.variance);
      lo = std::min(lo, c.mean - 8.0 * sd);
      hi = std::max(hi, c.mean + 8.0 * sd);
    }
    const std::size_t n = std::max<std::size_t>(options.ba_points, 3);
    std::vector<double> grid(n), pmf(n), dist(n * n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
      pmf[i] = src.density(grid[i]);
      mass += pmf[i];
    }
    for (auto& p : pmf) p /= mass;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = (grid[i] - grid[j]) * (grid[i] - grid[j]);
    // Slopes -1/(2D) aimed at D in [1.08, var/1.02]. Convergence stalls as
    // D -> 1 or R -> 0, where the lower bound and the zero-rate knot take over.
    constexpr int kSlopes = 8;
    constexpr double kLowTarget = 1.08;
    const double d_hi = var / 1.02;
    std::vector<double> warm;
    if (d_hi > kLowTarget) {
      for (int k = 0; k <= kSlopes; ++k) {
        const double target = d_hi * std::pow(kLowTarget / d_hi, static_cast<double>(k) / kSlopes);
        const auto r = blahut_arimoto(pmf, dist, n, -0.5 / target, warm);
        warm = r.output_pmf;
        if (r.distortion > 1.0) pts.push_back({r.rate, r.distortion});
      }
    }
  }
  return pts;
}

std::vector<RatePoint> ecsq_curve(const SourceMixture& src, const RdOptions& options) {
  const double var = src.variance();
  std::vector<RatePoint> pts;
  double gamma = options.bin_constraint ? 2.0 * (1.0 - 1e-12) : 8.0 * std::sqrt(var);
  if (!options.bin_constraint) pts.push_back({0.0, var});
  const double ratio = std::exp2(-1.0 / 16.0);
  RatePoint last{};
  for (; gamma >= 0.01; gamma *= ratio) {
    last = ecsq_point(src, {gamma, options.reconstruction});
    pts.push_back(last);
  }
  if (options.max_rate > last.rate)
    pts.push_back({options.max_rate, last.distortion * std::exp2(-2.0 * (options.max_rate - last.rate))});
  return pts;
}

}  // namespace

RdCurve build_rd_curve(const Prior& prior, double sigma2, int P, const RdOptions& options) {
  const auto src = normalized_node_source(prior, sigma2, P);
  std::vector<RatePoint> pts;
  switch (options.kind) {
    case RdKind::blahut_arimoto:
      pts = shannon_curve(src, options);
      break;
    case RdKind::ecsq:
      pts = ecsq_curve(src, options);
      break;
    case RdKind::gaussian_highrate: {
      // C1 matched to the RD curve at node distortion sigma2 * 1e-3.
      const double d_fit = P * 1e-3;
      double c1 = 0.0;
      if (d_fit <= 1.0) {
        c1 = std::exp2(2.0 * src.entropy_bits()) / (2.0 * std::numbers::pi * std::numbers::e);
      } else {
        const RdCurve ba(shannon_curve(src, options));
        c1 = d_fit * std::exp2(2.0 * ba.rate_for_distortion(d_fit));
      }
      pts = {{0.0, c1}, {options.max_rate, gaussian_highrate_distortion(options.max_rate, c1)}};
      break;
    }
  }
  const double scale = sigma2 / P;
  for (auto& p : pts) p.distortion *= scale;
  return RdCurve(std::move(pts));
}

RdFamily::RdFamily(const Prior& prior, int P, double sigma2_lo, double sigma2_hi, const RdOptions& options,
                   Parallelism par)
    : options_(options) {
  if (!(sigma2_lo > 0.0) || !(sigma2_hi >= sigma2_lo)) throw InvalidArgument("RD family needs 0 < lo <= hi");
  if (!(options.anchor_db > 0.0)) throw InvalidArgument("RD family anchor spacing must be positive");
  const double span_db = 10.0 * std::log10(sigma2_hi / sigma2_lo);
  const auto n = static_cast<std::size_t>(std::ceil(span_db / options.anchor_db - 1e-9)) + 1;
  anchors_.resize(std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    const double frac = anchors_.size() == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(anchors_.size() - 1);
    anchors_[i] = sigma2_lo * std::pow(10.0, frac * span_db / 10.0);
  }
  anchors_.back() = sigma2_hi;
  curves_.resize(anchors_.size());
  parallel_for(anchors_.size(), par, [&](std::size_t i) { curves_[i] = build_rd_curve(prior, anchors_[i], P, options_); });
}

std::optional<double> RdFamily::try_distortion(double sigma2, double R) const {
  if (R == std::numeric_limits<double>::infinity()) return 0.0;
  const double lo = anchors_.front();
  const double hi = anchors_.back();
  if (!(sigma2 >= lo * (1.0 - 1e-12) && sigma2 <= hi * (1.0 + 1e-12))) {
    std::ostringstream os;
    os << "channel variance " << sigma2 << " outside the RD family range [" << lo << ", " << hi << "]";
    throw InvalidArgument(os.str());
  }
  if (R > curves_.front().max_rate()) {
    std::ostringstream os;
    os << "rate " << R << " above the tabulated maximum " << curves_.front().max_rate();
    throw InvalidArgument(os.str());
  }
  const auto it = std::upper_bound(anchors_.begin(), anchors_.end(), sigma2);
  std::size_t i = it == anchors_.begin() ? 0 : static_cast<std::size_t>(it - anchors_.begin()) - 1;
  if (i + 1 >= anchors_.size() || sigma2 <= anchors_[i]) {
    i = std::min(i, anchors_.size() - 1);
    if (!curves_[i].contains_rate(R)) return std::nullopt;
    return curves_[i].distortion_for_rate(R);
  }
  const auto& a = curves_[i];
  const auto& b = curves_[i + 1];
  if (!a.contains_rate(R) || !b.contains_rate(R)) return std::nullopt;
  const double w = std::log(sigma2 / anchors_[i]) / std::log(anchors_[i + 1] / anchors_[i]);
  return std::exp((1.0 - w) * std::log(a.distortion_for_rate(R)) + w * std::log(b.distortion_for_rate(R)));
}

double RdFamily::distortion(double sigma2, double R) const {
  const auto d = try_distortion(sigma2, R);
  if (!d) {
    std::ostringstream os;
    os << "rate " << R << " is below the smallest achievable rate at channel variance " << sigma2;
    throw InvalidArgument(os.str());
  }
  return *d;
}

}  // namespace mpamp

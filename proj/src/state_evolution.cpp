#include "mpamp/state_evolution.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "mpamp/errors.hpp"

namespace mpamp {

void SystemConfig::validate() const {
  std::ostringstream os;
  if (!(kappa > 0.0) || !std::isfinite(kappa)) os << "kappa must be positive, got " << kappa;
  else if (!(sigma_z2 >= 0.0) || !std::isfinite(sigma_z2)) os << "sigma_z2 must be nonnegative, got " << sigma_z2;
  else if (P < 1) os << "P must be at least 1, got " << P;
  else return;
  throw InvalidArgument(os.str());
}

double se_step(const SystemConfig& config, double sigma2) {
  return config.sigma_z2 + denoiser_mse(config.prior, sigma2) / config.kappa;
}

double lossy_se_step(const SystemConfig& config, double sigma2, double D) {
  if (!(D >= 0.0)) throw InvalidArgument("distortion must be nonnegative");
  return config.sigma_z2 + denoiser_mse(config.prior, sigma2 + config.P * D) / config.kappa;
}

FixedPoint fixed_point(const SystemConfig& config) {
  config.validate();
  constexpr std::size_t kCap = 10'000;
  double s = config.initial_sigma2();
  FixedPoint fp;
  double change = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= kCap; ++it) {
    const double next = se_step(config, s);
    change = std::abs(next - s) / s;
    s = next;
    fp.iterations = it;
    if (change < 1e-12) break;
  }
  if (change >= 1e-12 && change > 1e-9) {
    std::ostringstream os;
    os << "state evolution did not reach a fixed point (relative change " << change << ")";
    throw NumericalError(os.str(), change);
  }
  fp.sigma_inf2 = s;
  fp.mmse = denoiser_mse(config.prior, s);
  fp.theta = denoiser_mse_slope(config.prior, s) / config.kappa;
  fp.growth = 0.5 * std::log2(1.0 / fp.theta);
  return fp;
}

double emse_db(double emse, double mmse) noexcept { return 10.0 * std::log10(1.0 + emse / mmse); }

double emse_from_db(double db, double mmse) noexcept { return mmse * (std::pow(10.0, db / 10.0) - 1.0); }

struct StateEvolution::Table {
  double log_lo = 0.0;
  double log_hi = 0.0;
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
};

StateEvolution::StateEvolution(SystemConfig config) : config_(std::move(config)) {
  fp_ = mpamp::fixed_point(config_);
  sigma1_ = config_.initial_sigma2();
  // Largest argument: sigma_1^2 + P * Var(node source) <= 2 sigma_1^2 + E[X^2]/P.
  const double lo = 0.9 * fp_.sigma_inf2;
  const double hi = 1.1 * (2.0 * sigma1_ + config_.prior.second_moment() / config_.P);
  constexpr double kStepDb = 0.01;
  // Padding keeps the spline's end conditions away from the usable range.
  constexpr std::size_t kPad = 16;
  const double h = kStepDb * std::log(10.0) / 10.0;
  const auto n = static_cast<std::size_t>(std::ceil(std::log(hi / lo) / h)) + 1;
  const double x0 = std::log(lo) - h * kPad;
  std::vector<double> values(n + 2 * kPad);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = std::log(denoiser_mse(config_.prior, std::exp(x0 + h * static_cast<double>(i))));
  auto t = std::make_unique<Table>(Table{std::log(lo), std::log(lo) + h * static_cast<double>(n - 1),
                                         {values.begin(), values.end(), x0, h}});
  table_ = std::move(t);
}

StateEvolution::~StateEvolution() = default;
StateEvolution::StateEvolution(StateEvolution&&) noexcept = default;
StateEvolution& StateEvolution::operator=(StateEvolution&&) noexcept = default;

double StateEvolution::table_lo() const noexcept { return std::exp(table_->log_lo); }
double StateEvolution::table_hi() const noexcept { return std::exp(table_->log_hi); }

double StateEvolution::mse(double sigma2) const {
  const double x = std::log(sigma2);
  if (!(x >= table_->log_lo && x <= table_->log_hi)) return mse_exact(sigma2);
  return std::exp(table_->spline(x));
}

void Trajectory::write_csv(std::ostream& os) const {
  os << "t,R_t,D_t,sigma2,mse,emse_db\n";
  const auto precision = os.precision(17);
  os << "0,0,0," << initial_sigma2 << ',' << initial_mse << ',' << emse_db(initial_mse - mmse, mmse) << '\n';
  for (const auto& s : states)
    os << s.t << ',' << s.rate << ',' << s.distortion << ',' << s.sigma2 << ',' << s.mse << ','
       << emse_db(s.emse, mmse) << '\n';
  os.precision(precision);
}

namespace {

template <class DistortionAt>
Trajectory run(const StateEvolution& se, std::size_t T, std::span<const double> rates, DistortionAt&& distortion_at) {
  Trajectory traj;
  traj.mmse = se.mmse();
  traj.initial_mse = se.config().prior.second_moment();
  traj.initial_sigma2 = se.initial_sigma2();
  double sigma2 = se.initial_sigma2();
  double mse = traj.initial_mse;
  for (std::size_t t = 0; t < T; ++t) {
    SEState st;
    st.t = t + 1;
    st.rate = rates.empty() ? std::numeric_limits<double>::quiet_NaN() : rates[t];
    st.sigma2 = sigma2;
    if (!rates.empty() && rates[t] == 0.0) {
      st.distortion = 0.0;
      st.mse = mse;
    } else {
      st.distortion = distortion_at(t, sigma2);
      st.mse = se.mse(sigma2 + se.config().P * st.distortion);
      mse = st.mse;
      sigma2 = se.config().sigma_z2 + mse / se.config().kappa;
    }
    st.emse = st.mse - traj.mmse;
    traj.states.push_back(st);
  }
  return traj;
}

}  // namespace

Trajectory run_schedule(const StateEvolution& se, std::span<const double> rates, const RdFamily& rd) {
  for (double r : rates)
    if (!(r >= 0.0)) throw InvalidArgument("coding rates must be nonnegative");
  return run(se, rates.size(), rates, [&](std::size_t t, double sigma2) { return rd.distortion(sigma2, rates[t]); });
}

Trajectory run_distortions(const StateEvolution& se, std::span<const double> distortions) {
  for (double d : distortions)
    if (!(d >= 0.0)) throw InvalidArgument("distortions must be nonnegative");
  return run(se, distortions.size(), {}, [&](std::size_t t, double) { return distortions[t]; });
}

}  // namespace mpamp

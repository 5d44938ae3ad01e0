#include "ead/schedule.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace ead {

namespace {
constexpr double kRatioSqFloor = 0.001;
}

double NoiseSchedule::polynomial_alpha(int t, int steps, double precision) {
  const double frac = static_cast<double>(t) / static_cast<double>(steps);
  const double f = 1.0 - frac * frac;
  return (1.0 - 2.0 * precision) * f + precision;
}

NoiseSchedule::NoiseSchedule(int steps, double precision)
    : horizon_(steps), precision_(precision) {
  if (steps < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
  if (!(precision > 0.0) || !(precision < 0.5))
    throw std::invalid_argument("NoiseSchedule: precision must be in (0, 0.5)");

  const int n = steps + 1;
  alpha_.resize(n);
  sigma_.resize(n);
  gamma_.resize(n);
  snr_.resize(n);
  ratio_sq_.resize(n);

  // Pointwise alpha, then clip step ratios squared and rebuild by
  // cumulative product with alpha_{-1} = 1.
  std::vector<double> raw(n);
  for (int t = 0; t < n; ++t) raw[t] = polynomial_alpha(t, steps, precision);

  double prev_raw = 1.0;
  double cum = 1.0;
  for (int t = 0; t < n; ++t) {
    const double r = raw[t] / prev_raw;
    const bool clipped = r * r < kRatioSqFloor;
    ratio_sq_[t] = clipped ? kRatioSqFloor : r * r;
    prev_raw = raw[t];
    cum *= clipped ? std::sqrt(kRatioSqFloor) : r;
    alpha_[t] = cum;
    const double a2 = alpha_[t] * alpha_[t];
    const double s2 = 1.0 - a2;
    sigma_[t] = std::sqrt(s2);
    snr_[t] = a2 / s2;
    gamma_[t] = std::log(s2) - std::log(a2);
  }
}

void NoiseSchedule::check_t(int t) const {
  if (t < 0 || t > horizon_)
    throw std::invalid_argument("NoiseSchedule: t out of range [0, T]");
}

std::pair<double, double> NoiseSchedule::snr_and_gamma(int t) const {
  check_t(t);
  return {snr_[t], gamma_[t]};
}

TransitionCoeffs NoiseSchedule::transition(int t, int s) const {
  check_t(t);
  check_t(s);
  if (s > t)
    throw std::invalid_argument("NoiseSchedule::transition: requires s <= t");
  if (s == t) return TransitionCoeffs{};  // exact identity, no 0/0

  const double a_t = alpha_[t], a_s = alpha_[s];
  const double s2_t = sigma_[t] * sigma_[t], s2_s = sigma_[s] * sigma_[s];

  TransitionCoeffs c;
  c.alpha_ts = a_t / a_s;
  c.sigma_ts_sq = std::max(0.0, s2_t - c.alpha_ts * c.alpha_ts * s2_s);
  c.mu_z_coeff = c.alpha_ts * s2_s / s2_t;
  c.mu_x_coeff = a_s * c.sigma_ts_sq / s2_t;
  c.sigma_t_to_s = std::sqrt(c.sigma_ts_sq) * sigma_[s] / sigma_[t];
  return c;
}

void NoiseSchedule::write_csv(std::ostream& os) const {
  os << "t,alpha,sigma,gamma\n";
  char buf[128];
  for (int t = 0; t <= horizon_; ++t) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", t, alpha_[t],
                  sigma_[t], gamma_[t]);
    os << buf;
  }
}

}  // namespace ead

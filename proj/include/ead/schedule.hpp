#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

namespace ead {

// Coefficients of the Gaussian transition from noise level t down to s
// and of the corresponding posterior q(z_s | x, z_t).
//
//   alpha_ts      = alpha_t / alpha_s
//   sigma_ts_sq   = sigma_t^2 - alpha_ts^2 * sigma_s^2
//   posterior mean = mu_z_coeff * z_t + mu_x_coeff * x
//   posterior std  = sigma_t_to_s
struct TransitionCoeffs {
  double alpha_ts = 1.0;
  double sigma_ts_sq = 0.0;
  double mu_z_coeff = 1.0;
  double mu_x_coeff = 0.0;
  double sigma_t_to_s = 0.0;
};

// Precomputed variance-preserving noise schedule over t = 0..T.
//
// alpha follows the quadratic polynomial alpha_t = (1 - 2p) * (1 - (t/T)^2) + p
// with a small precision p, then per-step ratios alpha_{t|t-1}^2 are clipped
// from below at 0.001 and alpha rebuilt as a cumulative product so that
// 1/alpha_{t|t-1} stays bounded during sampling. sigma_t = sqrt(1 - alpha_t^2).
class NoiseSchedule {
 public:
  NoiseSchedule(int steps, double precision);

  int horizon() const { return horizon_; }
  double precision() const { return precision_; }

  double alpha(int t) const { check_t(t); return alpha_[t]; }
  double sigma(int t) const { check_t(t); return sigma_[t]; }
  double gamma(int t) const { check_t(t); return gamma_[t]; }
  double snr(int t) const { check_t(t); return snr_[t]; }

  // Squared per-step ratio alpha_{t|t-1}^2 after clipping, t in [0, T]
  // (the step from the implicit alpha_{-1} = 1 at t = 0).
  double step_ratio_sq(int t) const { check_t(t); return ratio_sq_[t]; }

  // (SNR(t), gamma(t)) with SNR(t) = exp(-gamma(t)).
  std::pair<double, double> snr_and_gamma(int t) const;

  TransitionCoeffs transition(int t, int s) const;

  // Pointwise polynomial value before ratio clipping.
  static double polynomial_alpha(int t, int steps, double precision);

  // Columns: t, alpha, sigma, gamma.
  void write_csv(std::ostream& os) const;

 private:
  void check_t(int t) const;

  int horizon_;
  double precision_;
  std::vector<double> alpha_, sigma_, gamma_, snr_, ratio_sq_;
};

inline NoiseSchedule build_polynomial_schedule(int steps, double precision) {
  return NoiseSchedule(steps, precision);
}

}  // namespace ead

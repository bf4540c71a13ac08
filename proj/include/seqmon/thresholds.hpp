#ifndef SEQMON_THRESHOLDS_HPP
#define SEQMON_THRESHOLDS_HPP

#include <cmath>
#include <numbers>
#include <string>

#include "seqmon/core.hpp"

// Asymptotic Gumbel calibration: scaling sequences a_d/b_d, the level-alpha
// threshold, and the Brownian-range cdf used as a test oracle.

namespace seqmon {

/// Effective monitoring fraction q(T) = T/(T+1).
inline double q_of_T(double T) {
  if (!(T > 0.0)) throw BadSpec("T must be positive");
  return T / (T + 1.0);
}

struct Scaling {
  double a_d = 0.0;
  double b_d = 0.0;
  double q = 0.0;
};

/// a_d = sqrt(2 log d / q),
/// b_d = sqrt(2 q log d) - sqrt(q) (log log d - log(16/pi)) / (2 sqrt(2 log d)).
inline Scaling scaling(Eigen::Index d, double T) {
  if (d < 2)
    throw DimensionTooSmall("scaling sequences need d >= 2, got d=" +
                            std::to_string(d));
  const double q = q_of_T(T);
  const double logd = std::log(static_cast<double>(d));
  Scaling s;
  s.q = q;
  s.a_d = std::sqrt(2.0 * logd / q);
  s.b_d = std::sqrt(2.0 * q * logd) -
          std::sqrt(q) * (std::log(logd) - std::log(16.0 / std::numbers::pi)) /
              (2.0 * std::sqrt(2.0 * logd));
  return s;
}

/// (1-alpha) quantile of the standard Gumbel law exp(-exp(-x)).
inline double gumbel_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw BadAlpha("alpha must lie in (0,1)");
  return -std::log(-std::log1p(-alpha));
}

/// Asymptotic level-alpha threshold c_{d,alpha} = g_{1-alpha}/a_d + b_d.
inline double gumbel_threshold(Eigen::Index d, double T, double alpha) {
  const Scaling s = scaling(d, T);
  return gumbel_quantile(alpha) / s.a_d + s.b_d;
}

namespace detail {

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace detail

/// Cdf of the range max-min of a standard Brownian motion on [0,q]:
/// F(x) = 1 + 8 sum_{k>=1} (-1)^k k Phi(-kx/sqrt(q)) for x > 0, else 0.
/// The alternating series is truncated once a term drops below 1e-14 in
/// magnitude or after 200 terms; for 0 < x < 0.05 the result is clamped and
/// *reduced_precision (when given) is set.
inline double range_bm_cdf(double x, double q, bool* reduced_precision = nullptr) {
  if (!(q > 0.0 && q <= 1.0)) throw BadSpec("q must lie in (0,1]");
  if (reduced_precision) *reduced_precision = false;
  if (x <= 0.0) return 0.0;
  if (x < 0.05) {
    // the alternating series is numerically unreliable this close to zero;
    // the true mass below 0.05 is far under double precision, so clamp to 0
    if (reduced_precision) *reduced_precision = true;
    return 0.0;
  }
  const double sq = std::sqrt(q);
  double f = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = 8.0 * k * detail::norm_cdf(-k * x / sq);
    f += (k % 2 == 0) ? term : -term;
    if (term < 1e-14) break;
  }
  return std::clamp(f, 0.0, 1.0);
}

}  // namespace seqmon

#endif  // SEQMON_THRESHOLDS_HPP

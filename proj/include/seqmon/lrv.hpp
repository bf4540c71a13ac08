#ifndef SEQMON_LRV_HPP
#define SEQMON_LRV_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "seqmon/core.hpp"

// Long-run variance / covariance estimation from the stable initial sample.
// All estimators here see only the first m rows handed to them; callers must
// never pass monitoring-period data.

namespace seqmon {

enum class AutocovDenom { m, m_minus_t };

namespace detail {

inline void require_component(const Matrix& stable, int h) {
  if (h < 1 || h > stable.cols())
    throw BadDims("component index " + std::to_string(h) + " outside 1.." +
                  std::to_string(stable.cols()));
}

// centered column, mean removed over all m rows
inline Vector centered(const Matrix& stable, int h) {
  Vector c = stable.col(h - 1);
  c.array() -= c.mean();
  return c;
}

// lag-t cross covariance sum  sum_{j=t+1}^m c_h[j] * c_i[j-t]  on centered
// columns (0-based Eigen storage)
inline double lag_dot(const Vector& ch, const Vector& ci, Eigen::Index t) {
  const Eigen::Index m = ch.size();
  return ch.tail(m - t).dot(ci.head(m - t));
}

}  // namespace detail

/// Lag-t autocovariance of component h over the stable sample,
/// (1/D) sum_{i=t+1}^m (X_{i,h}-mean)(X_{i-t,h}-mean) with D = m or m-t.
inline double autocov(const Matrix& stable, Eigen::Index t, int h,
                      AutocovDenom denom) {
  detail::require_component(stable, h);
  const Eigen::Index m = stable.rows();
  if (t < 0 || t >= m)
    throw LagTooLarge("lag " + std::to_string(t) + " >= m=" + std::to_string(m));
  const Vector c = detail::centered(stable, h);
  const double D =
      denom == AutocovDenom::m ? static_cast<double>(m) : static_cast<double>(m - t);
  return detail::lag_dot(c, c, t) / D;
}

/// Quadratic spectral kernel, k(0) = 1, defined for real arguments.
inline double qs_kernel(double x) {
  if (x == 0.0) return 1.0;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  if (std::abs(x) < 0.01) {
    // sin(z)/z - cos(z) cancels catastrophically near zero; use its Taylor
    // expansion, accurate to well below 1e-14 on this branch
    const double x2 = x * x;
    return 1.0 - (1296.0 * pi2 / 9000.0) * x2 +
           (25.0 / (12.0 * pi2)) * std::pow(6.0 * std::numbers::pi / 5.0, 6) /
               840.0 * x2 * x2;
  }
  const double z = 6.0 * std::numbers::pi * x / 5.0;
  return 25.0 / (12.0 * std::numbers::pi * std::numbers::pi * x * x) *
         (std::sin(z) / z - std::cos(z));
}

namespace detail {

// Positivity floor: an LRV estimate <= 0 is replaced by
// floor_fraction * (sample variance); a zero sample variance is fatal.
inline double apply_floor(double est, double sample_var, double floor_fraction,
                          int h, bool* floored) {
  if (floored) *floored = false;
  if (est > 0.0) return est;
  if (sample_var <= 0.0)
    throw DegenerateComponent("component " + std::to_string(h) +
                              " has zero sample variance");
  if (floored) *floored = true;
  return floor_fraction * sample_var;
}

}  // namespace detail

/// Truncated-sum long-run variance: phi_0 + 2 * sum_{t=1}^{floor(H)} phi_t
/// with denominator m-t, floored for positivity.
inline double lrv_standard(const Matrix& stable, int h, double H,
                           double floor_fraction = 0.05,
                           bool* floored = nullptr) {
  detail::require_component(stable, h);
  const Eigen::Index m = stable.rows();
  const auto lags = static_cast<Eigen::Index>(std::floor(H));
  if (lags > m - 1)
    throw BandwidthTooLarge("floor(H)=" + std::to_string(lags) +
                            " exceeds m-1=" + std::to_string(m - 1));
  const Vector c = detail::centered(stable, h);
  double est = c.squaredNorm() / static_cast<double>(m);
  const double sample_var = est;
  for (Eigen::Index t = 1; t <= lags; ++t)
    est += 2.0 * detail::lag_dot(c, c, t) / static_cast<double>(m - t);
  return detail::apply_floor(est, sample_var, floor_fraction, h, floored);
}

/// Quadratic spectral long-run variance: sum over |t| <= m-1 of
/// k(t/H) * phi_t with denominator m, floored for positivity.
inline double lrv_qs(const Matrix& stable, int h, double H,
                     double floor_fraction = 0.05, bool* floored = nullptr) {
  detail::require_component(stable, h);
  if (!(H > 0.0)) throw BandwidthTooLarge("QS bandwidth must be positive");
  const Eigen::Index m = stable.rows();
  const Vector c = detail::centered(stable, h);
  const double inv_m = 1.0 / static_cast<double>(m);
  double est = c.squaredNorm() * inv_m;
  const double sample_var = est;
  for (Eigen::Index t = 1; t <= m - 1; ++t)
    est += 2.0 * qs_kernel(static_cast<double>(t) / H) *
           detail::lag_dot(c, c, t) * inv_m;
  return detail::apply_floor(est, sample_var, floor_fraction, h, floored);
}

/// Per-component long-run variances for a whole panel.
struct LrvEstimate {
  Array sigma2;               // one positive entry per component
  LrvConfig method;
  std::vector<int> floored;   // 1-based components where the floor fired

  Eigen::Index dim() const { return sigma2.size(); }
};

inline LrvEstimate estimate_lrv(const Matrix& stable, const LrvConfig& cfg) {
  check_finite(stable, "stable sample");
  const Eigen::Index d = stable.cols();
  const double H = cfg.bandwidth_for(stable.rows());
  LrvEstimate out;
  out.sigma2.resize(d);
  out.method = cfg;
  for (int h = 1; h <= d; ++h) {
    bool fl = false;
    out.sigma2[h - 1] =
        cfg.method == LrvMethod::quadratic_spectral
            ? lrv_qs(stable, h, H, cfg.floor_fraction, &fl)
            : lrv_standard(stable, h, H, cfg.floor_fraction, &fl);
    if (fl) out.floored.push_back(h);
  }
  return out;
}

/// Long-run covariance between components h and i:
/// phi_{0,h,i} + sum_{t=1}^{floor(H)} (phi_{t,h,i} + phi_{t,i,h}),
/// cross covariances with denominator m-t.
inline double lrcov(const Matrix& stable, int h, int i, double H) {
  detail::require_component(stable, h);
  detail::require_component(stable, i);
  const Eigen::Index m = stable.rows();
  const auto lags = static_cast<Eigen::Index>(std::floor(H));
  if (lags > m - 1)
    throw BandwidthTooLarge("floor(H)=" + std::to_string(lags) +
                            " exceeds m-1=" + std::to_string(m - 1));
  const Vector ch = detail::centered(stable, h);
  const Vector ci = detail::centered(stable, i);
  double est = ch.dot(ci) / static_cast<double>(m);
  for (Eigen::Index t = 1; t <= lags; ++t)
    est += (detail::lag_dot(ch, ci, t) + detail::lag_dot(ci, ch, t)) /
           static_cast<double>(m - t);
  return est;
}

/// Long-run correlation matrix rho_{h,i} = gamma_{h,i} / (sigma_h sigma_i),
/// unit diagonal, off-diagonals clamped just inside [-1, 1].
inline CorrelationEstimate correlation_matrix(const Matrix& stable,
                                              const LrvConfig& cfg) {
  check_finite(stable, "stable sample");
  const Eigen::Index d = stable.cols();
  const double H = cfg.bandwidth_for(stable.rows());
  const LrvEstimate lrv = estimate_lrv(stable, cfg);  // throws on degenerate
  const Array sigma = lrv.sigma2.sqrt();
  CorrelationEstimate out;
  out.rho = Matrix::Identity(d, d);
  constexpr double clamp = 1.0 - 1e-12;
  for (int h = 1; h <= d; ++h) {
    for (int i = h + 1; i <= d; ++i) {
      double r = lrcov(stable, h, i, H) / (sigma[h - 1] * sigma[i - 1]);
      r = std::clamp(r, -clamp, clamp);
      out.rho(h - 1, i - 1) = r;
      out.rho(i - 1, h - 1) = r;
    }
  }
  return out;
}

}  // namespace seqmon

#endif  // SEQMON_LRV_HPP

#ifndef SEQMON_BOOTSTRAP_HPP
#define SEQMON_BOOTSTRAP_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "seqmon/core.hpp"
#include "seqmon/detector.hpp"
#include "seqmon/lrv.hpp"
#include "seqmon/parallel.hpp"
#include "seqmon/rng.hpp"
#include "seqmon/thresholds.hpp"

// Gaussian calibration: the detector recomputed on temporally independent,
// spatially rho-correlated standard normal panels.  The empirical quantile
// of a_d(T^(Z) - b_d) replaces the Gumbel quantile at finite m.

namespace seqmon {

struct PsdRepair {
  CorrelationEstimate rho;
  bool applied = false;
  std::optional<double> min_eigen_clipped;
};

/// Finite-sample correlation estimates need not be PSD.  Clip eigenvalues
/// below 1e-10, reconstruct, rescale back to unit diagonal.
inline PsdRepair psd_repair(const CorrelationEstimate& rho) {
  constexpr double kMinEig = 1e-10;
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.rho);
  PsdRepair out;
  const Vector& ev = es.eigenvalues();
  if (ev.minCoeff() >= kMinEig) {
    out.rho = rho;
    return out;
  }
  out.applied = true;
  out.min_eigen_clipped = ev.minCoeff();
  Vector clipped = ev.cwiseMax(kMinEig);
  Matrix r = es.eigenvectors() * clipped.asDiagonal() *
             es.eigenvectors().transpose();
  Vector scale = r.diagonal().cwiseSqrt().cwiseInverse();
  r = scale.asDiagonal() * r * scale.asDiagonal();
  r.diagonal().setOnes();
  r = 0.5 * (r + r.transpose()).eval();
  out.rho.rho = std::move(r);
  return out;
}

/// One replicate panel: rows are i.i.d. N(0, rho) via the Cholesky factor.
/// Used by tests and small cases; the calibration path streams rows instead.
inline Matrix gen_replicate(const Matrix& rho_chol, Eigen::Index n_rows,
                            std::mt19937_64& rng) {
  const Eigen::Index d = rho_chol.rows();
  std::normal_distribution<double> normal;
  Matrix z(n_rows, d);
  for (Eigen::Index t = 0; t < n_rows; ++t)
    for (Eigen::Index h = 0; h < d; ++h) z(t, h) = normal(rng);
  return z * rho_chol.transpose();
}

/// Bootstrap statistic of a full (m+Tm) x d panel:
/// max_{k,h,j} w(k/m)(k-j)/sqrt(m) |zbar(m+j+1..m+k) - zbar(1..m+j)|.
/// Same prefix-mean min/max refactoring as the detector; no sigma division.
inline double bootstrap_statistic(const Matrix& panel, Eigen::Index m, double T) {
  const auto n_mon = static_cast<Eigen::Index>(std::llround(T * static_cast<double>(m)));
  if (panel.rows() != m + n_mon)
    throw ShapeMismatch("panel has " + std::to_string(panel.rows()) +
                        " rows, expected m+Tm=" + std::to_string(m + n_mon));
  const Eigen::Index d = panel.cols();
  const double sqrt_m = std::sqrt(static_cast<double>(m));

  Array prefix = panel.topRows(m).colwise().sum().transpose().array();
  Array umin(d), umax(d);
  double best = 0.0;
  for (Eigen::Index k = 1; k <= n_mon; ++k) {
    const double n_prev = static_cast<double>(m + k - 1);
    const double n_now = n_prev + 1.0;
    const double w = weight(k, m);
    for (Eigen::Index h = 0; h < d; ++h) {
      const double u_prev = prefix[h] / n_prev;
      if (k == 1) {
        umin[h] = u_prev;
        umax[h] = u_prev;
      } else {
        umin[h] = std::min(umin[h], u_prev);
        umax[h] = std::max(umax[h], u_prev);
      }
      prefix[h] += panel(m + k - 1, h);
      const double u_now = prefix[h] / n_now;
      const double dev = std::max(u_now - umin[h], umax[h] - u_now);
      best = std::max(best, w * n_now * dev / sqrt_m);
    }
  }
  return best;
}

struct BootstrapQuantile {
  double q_value = 0.0;        // empirical (1-alpha) quantile on a_d(.-b_d) scale
  double threshold = 0.0;      // q_value/a_d + b_d, the monitoring threshold
  int n_replicates = 0;
  std::uint64_t seed = 0;
  bool psd_repair_applied = false;
  std::optional<double> min_eigen_clipped;
};

namespace detail {

// Streaming replicate evaluation: rows are generated and folded into the
// incremental statistic one at a time, O(d) memory per replicate.
inline double replicate_statistic(const Matrix* chol, Eigen::Index d,
                                  Eigen::Index m, Eigen::Index n_mon,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector z(d), row(d);
  auto draw_row = [&](Vector& dst) {
    for (Eigen::Index h = 0; h < d; ++h) z[h] = normal(rng);
    if (chol)
      dst.noalias() = (*chol) * z;
    else
      dst = z;
  };

  const double sqrt_m = std::sqrt(static_cast<double>(m));
  Array prefix = Array::Zero(d);
  for (Eigen::Index t = 0; t < m; ++t) {
    draw_row(row);
    prefix += row.array();
  }
  Array umin(d), umax(d);
  double best = 0.0;
  for (Eigen::Index k = 1; k <= n_mon; ++k) {
    const double n_prev = static_cast<double>(m + k - 1);
    const double n_now = n_prev + 1.0;
    const double w = weight(k, m);
    draw_row(row);
    for (Eigen::Index h = 0; h < d; ++h) {
      const double u_prev = prefix[h] / n_prev;
      if (k == 1) {
        umin[h] = u_prev;
        umax[h] = u_prev;
      } else {
        umin[h] = std::min(umin[h], u_prev);
        umax[h] = std::max(umax[h], u_prev);
      }
      prefix[h] += row[h];
      const double u_now = prefix[h] / n_now;
      const double dev = std::max(u_now - umin[h], umax[h] - u_now);
      best = std::max(best, w * n_now * dev / sqrt_m);
    }
  }
  return best;
}

// Studentized replicate: the panel is materialized, the long-run variances
// are re-estimated on its first m rows with the same estimator used for the
// real data, and the statistic divides by them — so the quantile carries the
// same variance-estimation noise as the monitored statistic.  Draw order is
// identical to gen_replicate.
inline double studentized_replicate_statistic(const Matrix* chol,
                                              Eigen::Index d, Eigen::Index m,
                                              Eigen::Index n_mon,
                                              std::mt19937_64& rng,
                                              const LrvConfig& lrv) {
  std::normal_distribution<double> normal;
  Matrix panel(m + n_mon, d);
  Vector z(d);
  for (Eigen::Index t = 0; t < m + n_mon; ++t) {
    for (Eigen::Index h = 0; h < d; ++h) z[h] = normal(rng);
    if (chol)
      panel.row(t).noalias() = z.transpose() * chol->transpose();
    else
      panel.row(t) = z.transpose();
  }
  const LrvEstimate sig = estimate_lrv(panel.topRows(m), lrv);
  const Array sigma = sig.sigma2.sqrt();

  const double sqrt_m = std::sqrt(static_cast<double>(m));
  Array prefix = panel.topRows(m).colwise().sum().transpose().array();
  Array umin(d), umax(d);
  double best = 0.0;
  for (Eigen::Index k = 1; k <= n_mon; ++k) {
    const double n_prev = static_cast<double>(m + k - 1);
    const double n_now = n_prev + 1.0;
    const double w = weight(k, m);
    for (Eigen::Index h = 0; h < d; ++h) {
      const double u_prev = prefix[h] / n_prev;
      if (k == 1) {
        umin[h] = u_prev;
        umax[h] = u_prev;
      } else {
        umin[h] = std::min(umin[h], u_prev);
        umax[h] = std::max(umax[h], u_prev);
      }
      prefix[h] += panel(m + k - 1, h);
      const double u_now = prefix[h] / n_now;
      const double dev = std::max(u_now - umin[h], umax[h] - u_now);
      best = std::max(best, w * n_now * dev / (sqrt_m * sigma[h]));
    }
  }
  return best;
}

}  // namespace detail

/// Algorithm steps 1.1-1.3: N replicate statistics, empirical quantile of
/// a_d(T^(Z) - b_d) by the inverse-cdf order statistic at ceil(N(1-alpha)).
/// Replicate n draws from the stream (seed, n), so results do not depend on
/// evaluation order.  For d = 1 the affine a_d/b_d rescaling cancels in the
/// threshold; identity scaling is used there.
///
/// When `studentize` is non-null each replicate is divided by long-run
/// variances re-estimated on its own stable window with that configuration.
/// The default quantile treats the replicates as exactly standardized; the
/// studentized variant mirrors the estimation noise the real statistic
/// carries, which matters for small m and large d.
inline BootstrapQuantile calibrate_bootstrap(const CorrelationEstimate& rho,
                                             const MonitorConfig& cfg,
                                             const LrvConfig* studentize = nullptr) {
  validate_config(cfg);
  if (cfg.bootstrap_n < 100)
    throw TooFewReplicates("need at least 100 bootstrap replicates, got " +
                           std::to_string(cfg.bootstrap_n));
  if (rho.dim() != cfg.d)
    throw ShapeMismatch("correlation matrix dimension mismatch");

  BootstrapQuantile out;
  out.n_replicates = cfg.bootstrap_n;
  out.seed = cfg.seed;

  std::optional<Matrix> chol;
  if (!rho.is_identity()) {
    PsdRepair rep = psd_repair(rho);
    out.psd_repair_applied = rep.applied;
    out.min_eigen_clipped = rep.min_eigen_clipped;
    chol = Eigen::LLT<Matrix>(rep.rho.rho).matrixL();
  }

  double a_d = 1.0, b_d = 0.0;
  if (cfg.d >= 2) {
    const Scaling s = scaling(cfg.d, cfg.T);
    a_d = s.a_d;
    b_d = s.b_d;
  }

  const Eigen::Index n_mon = cfg.horizon();
  std::vector<double> stats(cfg.bootstrap_n);
  const Matrix* cholp = chol ? &*chol : nullptr;
  parallel_for(cfg.bootstrap_n, [&](long n) {
    std::mt19937_64 rng = make_stream(cfg.seed, static_cast<std::uint64_t>(n));
    const double t =
        studentize ? detail::studentized_replicate_statistic(cholp, cfg.d, cfg.m,
                                                             n_mon, rng, *studentize)
                   : detail::replicate_statistic(cholp, cfg.d, cfg.m, n_mon, rng);
    stats[n] = a_d * (t - b_d);
  });

  std::sort(stats.begin(), stats.end());
  const auto idx = static_cast<std::size_t>(
      std::ceil(cfg.bootstrap_n * (1.0 - cfg.alpha))) - 1;
  out.q_value = stats[idx];
  out.threshold = out.q_value / a_d + b_d;
  return out;
}

}  // namespace seqmon

#endif  // SEQMON_BOOTSTRAP_HPP

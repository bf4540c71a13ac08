#ifndef SEQMON_SIMLAB_HPP
#define SEQMON_SIMLAB_HPP

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "seqmon/bootstrap.hpp"
#include "seqmon/core.hpp"
#include "seqmon/detector.hpp"
#include "seqmon/lrv.hpp"
#include "seqmon/parallel.hpp"
#include "seqmon/rng.hpp"
#include "seqmon/thresholds.hpp"

// Simulation lab: data-generating processes, mean-shift injection, and the
// Monte Carlo size/power harness.

namespace seqmon {

enum class Model { M1, M2, M3, M4 };

inline Model model_from_string(const std::string& s) {
  if (s == "M1" || s == "m1") return Model::M1;
  if (s == "M2" || s == "m2") return Model::M2;
  if (s == "M3" || s == "m3") return Model::M3;
  if (s == "M4" || s == "m4") return Model::M4;
  throw BadSpec("unknown model '" + s + "'");
}

struct DgpSpec {
  Model model = Model::M1;
  Eigen::Index m = 100;
  Eigen::Index d = 100;
  double T = 1.0;
  Eigen::Index burn_in = -1;  // -1: 200 for the AR(1) model, 0 otherwise
  std::uint64_t seed = 0;

  Eigen::Index rows() const {
    return m + static_cast<Eigen::Index>(std::llround(T * static_cast<double>(m)));
  }
  Eigen::Index effective_burn_in() const {
    if (burn_in >= 0) return burn_in;
    return model == Model::M2 ? 200 : 0;
  }
};

struct ChangeSpec {
  double delta = 0.0;
  std::vector<int> affected;   // 1-based components
  Eigen::Index k_star = -1;    // -1: default m/2

  Eigen::Index effective_k_star(Eigen::Index m) const {
    return k_star >= 0 ? k_star : m / 2;
  }
  // (A1) first component, (A2) first half, (A3) all
  static ChangeSpec preset(const std::string& name, Eigen::Index d, double delta,
                           Eigen::Index k_star = -1) {
    ChangeSpec c;
    c.delta = delta;
    c.k_star = k_star;
    Eigen::Index upto;
    if (name == "A1") upto = 1;
    else if (name == "A2") upto = d / 2;
    else if (name == "A3") upto = d;
    else throw BadSpec("unknown alternative '" + name + "'");
    for (Eigen::Index h = 1; h <= upto; ++h) c.affected.push_back(static_cast<int>(h));
    return c;
  }
};

/// Cholesky factor of the M4 spatial covariance Sigma_ij = 1/(|i-j|+1).
inline Matrix m4_cholesky(Eigen::Index d) {
  Matrix sigma(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      sigma(i, j) = 1.0 / (std::abs(static_cast<double>(i - j)) + 1.0);
  return Eigen::LLT<Matrix>(sigma).matrixL();
}

namespace detail {

inline double laplace_draw(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  if (u <= 0.0) u = std::numeric_limits<double>::min();
  if (u >= 1.0) u = 1.0 - std::numeric_limits<double>::epsilon();
  return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
}

}  // namespace detail

/// Generate an (m + Tm) x d panel from one of the four models, optionally
/// adding a mean shift of size delta to the affected components for rows
/// t >= m + k*.  A precomputed M4 Cholesky factor can be shared across runs.
inline Matrix generate(const DgpSpec& dgp, const ChangeSpec* change,
                       std::mt19937_64& rng, const Matrix* m4_chol = nullptr) {
  if (dgp.m < 2 || dgp.d < 1 || dgp.rows() <= dgp.m)
    throw BadSpec("invalid DGP dimensions");
  const Eigen::Index n = dgp.rows();
  const Eigen::Index d = dgp.d;
  Matrix x(n, d);

  switch (dgp.model) {
    case Model::M1: {
      std::chi_squared_distribution<double> chi2(10.0);
      const double scale = 1.0 / std::sqrt(20.0);
      for (Eigen::Index h = 0; h < d; ++h)
        for (Eigen::Index t = 0; t < n; ++t) x(t, h) = chi2(rng) * scale;
      break;
    }
    case Model::M2: {
      std::normal_distribution<double> normal;
      const Eigen::Index burn = dgp.effective_burn_in();
      for (Eigen::Index h = 0; h < d; ++h) {
        double prev = 0.0;
        for (Eigen::Index t = 0; t < burn; ++t) prev = 0.1 * prev + normal(rng);
        for (Eigen::Index t = 0; t < n; ++t) {
          prev = 0.1 * prev + normal(rng);
          x(t, h) = prev;
        }
      }
      break;
    }
    case Model::M3: {
      for (Eigen::Index h = 0; h < d; ++h) {
        double e1 = detail::laplace_draw(rng);  // eta_{t-1}
        double e2 = detail::laplace_draw(rng);  // eta_{t-2}
        for (Eigen::Index t = 0; t < n; ++t) {
          const double e0 = detail::laplace_draw(rng);
          x(t, h) = e0 + 0.3 * e1 - 0.1 * e2;
          e2 = e1;
          e1 = e0;
        }
      }
      break;
    }
    case Model::M4: {
      std::normal_distribution<double> normal;
      Matrix z(n, d);
      for (Eigen::Index t = 0; t < n; ++t)
        for (Eigen::Index h = 0; h < d; ++h) z(t, h) = normal(rng);
      if (m4_chol) {
        x.noalias() = z * m4_chol->transpose();
      } else {
        const Matrix chol = m4_cholesky(d);
        x.noalias() = z * chol.transpose();
      }
      break;
    }
  }

  if (change && change->delta != 0.0 && !change->affected.empty()) {
    const Eigen::Index from = dgp.m + change->effective_k_star(dgp.m);
    if (from < dgp.m || from > n) throw BadSpec("change time outside monitoring window");
    for (int h : change->affected) {
      if (h < 1 || h > d) throw BadSpec("affected component outside 1..d");
      x.col(h - 1).segment(from - 1, n - from + 1).array() += change->delta;
    }
  }
  return x;
}

struct McResult {
  double rate = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // Wilson 95%
  int runs = 0;
  double threshold = 0.0;
  double mean_delay = std::numeric_limits<double>::quiet_NaN();
};

/// Wilson 95% score interval for a binomial proportion.
inline std::pair<double, double> wilson_ci(int successes, int n) {
  const double z = 1.959963984540054;
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // at the boundaries center and half agree analytically; avoid roundoff dust
  const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
  return {lo, hi};
}

struct McOptions {
  // Table-2 shortcut: bootstrap calibration with rho = identity, quantile
  // computed once and shared across runs.
  bool bootstrap_independent = true;
};

namespace detail {

inline double resolve_threshold(const DgpSpec& dgp, const MonitorConfig& cfg,
                                const McOptions& opts,
                                const Matrix* stable_for_rho) {
  if (cfg.calibration == CalibrationMethod::gumbel)
    return gumbel_threshold(cfg.d, cfg.T, cfg.alpha);
  CorrelationEstimate rho;
  if (opts.bootstrap_independent || !stable_for_rho)
    rho.rho = Matrix::Identity(cfg.d, cfg.d);
  else
    rho = correlation_matrix(*stable_for_rho, cfg.lrv);
  (void)dgp;
  // studentize replicates: the monitored statistic divides by estimated
  // long-run variances, so the calibrating quantile must carry the same
  // estimation noise or the study undersizes the threshold at small m
  return calibrate_bootstrap(rho, cfg, &cfg.lrv).threshold;
}

inline McResult mc_run(const DgpSpec& dgp, const ChangeSpec* change,
                       const MonitorConfig& cfg, int runs,
                       const McOptions& opts) {
  if (runs < 1) throw BadSpec("runs must be >= 1");
  MonitorConfig run_cfg = cfg;
  run_cfg.m = dgp.m;
  run_cfg.d = dgp.d;
  run_cfg.T = dgp.T;
  validate_config(run_cfg);

  std::optional<Matrix> chol;
  if (dgp.model == Model::M4) chol = m4_cholesky(dgp.d);
  const Matrix* cholp = chol ? &*chol : nullptr;

  // Shared threshold unless the bootstrap must be re-estimated per run.
  std::optional<double> shared_threshold;
  if (run_cfg.calibration == CalibrationMethod::gumbel || opts.bootstrap_independent)
    shared_threshold = resolve_threshold(dgp, run_cfg, opts, nullptr);

  // Run streams live in a different seed domain than bootstrap replicates.
  const std::uint64_t run_seed = splitmix64(dgp.seed ^ 0x72756e73ull);

  std::vector<char> rejected(runs, 0);
  std::vector<double> delay(runs, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> thresholds(runs, 0.0);
  parallel_for(runs, [&](long r) {
    std::mt19937_64 rng = make_stream(run_seed, static_cast<std::uint64_t>(r));
    const Matrix panel = generate(dgp, change, rng, cholp);
    const Matrix stable = panel.topRows(dgp.m);
    const LrvEstimate sigma = estimate_lrv(stable, run_cfg.lrv);
    double thr;
    if (shared_threshold) {
      thr = *shared_threshold;
    } else {
      MonitorConfig c = run_cfg;
      c.seed = splitmix64(run_seed ^ static_cast<std::uint64_t>(r));
      thr = resolve_threshold(dgp, c, opts, &stable);
    }
    thresholds[r] = thr;
    MonitorOptions mo;
    mo.stop_on_first_alarm = true;  // only alarm presence and time matter here
    const MonitorResult res = run_monitor(
        stable, panel.bottomRows(panel.rows() - dgp.m), run_cfg, sigma, thr, mo);
    if (!res.alarms.empty()) {
      rejected[r] = 1;
      if (change)
        delay[r] = static_cast<double>(res.alarms.front().k -
                                       change->effective_k_star(dgp.m));
    }
  });

  McResult out;
  out.runs = runs;
  int hits = 0;
  for (char c : rejected) hits += c;
  out.rate = static_cast<double>(hits) / runs;
  std::tie(out.ci_lo, out.ci_hi) = wilson_ci(hits, runs);
  out.threshold = thresholds[0];
  if (change && hits > 0) {
    double sum = 0.0;
    for (double v : delay)
      if (!std::isnan(v)) sum += v;
    out.mean_delay = sum / hits;
  }
  return out;
}

}  // namespace detail

/// Empirical size: fraction of runs with at least one alarm under the null.
inline McResult mc_size(const DgpSpec& dgp, const MonitorConfig& cfg, int runs,
                        const McOptions& opts = {}) {
  if (runs < 1) throw BadSpec("runs must be >= 1");
  return detail::mc_run(dgp, nullptr, cfg, runs, opts);
}

/// Empirical power under an injected mean shift; also reports the mean
/// detection delay among rejecting runs (diagnostic only).
inline McResult mc_power(const DgpSpec& dgp, const ChangeSpec& change,
                         const MonitorConfig& cfg, int runs,
                         const McOptions& opts = {}) {
  if (runs < 1) throw BadSpec("runs must be >= 1");
  return detail::mc_run(dgp, &change, cfg, runs, opts);
}

}  // namespace seqmon

#endif  // SEQMON_SIMLAB_HPP

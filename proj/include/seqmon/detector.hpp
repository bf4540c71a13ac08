#ifndef SEQMON_DETECTOR_HPP
#define SEQMON_DETECTOR_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "seqmon/core.hpp"
#include "seqmon/lrv.hpp"

// Online monitoring engine.  The per-component detector
//   E_{m,h}(k) = max_{j=0}^{k-1} (k-j)/(sqrt(m) sigma_h) |mean(m+j+1..m+k) - mean(1..m+j)|
// is evaluated incrementally: with prefix means U_j = mean of the first m+j
// observations, the identity (k-j)(mean(m+j+1..m+k) - U_j) = (m+k)(U_k - U_j)
// reduces the inner max to running min/max of prefix means, giving O(1) state
// and O(1) work per component per tick.

namespace seqmon {

struct DetectorState {
  Eigen::Index m = 0;
  Eigen::Index horizon = 0;   // T*m
  Eigen::Index k = 0;         // current monitoring step, 0..horizon
  Array sigma;                // sqrt of long-run variances, frozen at init
  Array prefix_sum;           // sum of all observations seen so far, per comp
  Array umin, umax;           // running min/max of prefix means U_0..U_{k-1}
  std::vector<char> active;   // elimination mask, 0-based
  Eigen::Index n_active = 0;

  std::vector<int> active_set() const {
    std::vector<int> s;
    for (std::size_t h = 0; h < active.size(); ++h)
      if (active[h]) s.push_back(static_cast<int>(h) + 1);
    return s;
  }
};

struct StepDecision {
  Eigen::Index k = 0;
  double max_statistic = 0.0;      // max over active h of w(k/m) E_{m,h}(k)
  std::vector<int> rejected;       // 1-based components removed this step
  bool continue_monitoring = true;
};

/// Boundary weight w(t) = 1/(1+t) evaluated at t = k/m.
inline double weight(Eigen::Index k, Eigen::Index m) {
  return 1.0 / (1.0 + static_cast<double>(k) / static_cast<double>(m));
}

inline DetectorState init(const Matrix& stable, const MonitorConfig& cfg,
                          const LrvEstimate& sigma) {
  validate_config(cfg);
  if (stable.rows() != cfg.m || stable.cols() != cfg.d)
    throw ShapeMismatch("stable sample is " + std::to_string(stable.rows()) +
                        "x" + std::to_string(stable.cols()) + ", config wants " +
                        std::to_string(cfg.m) + "x" + std::to_string(cfg.d));
  if (sigma.dim() != cfg.d)
    throw ShapeMismatch("sigma has " + std::to_string(sigma.dim()) +
                        " entries for d=" + std::to_string(cfg.d));
  check_finite(stable, "stable sample");

  DetectorState st;
  st.m = cfg.m;
  st.horizon = cfg.horizon();
  st.k = 0;
  st.sigma = sigma.sigma2.sqrt();
  st.prefix_sum = stable.colwise().sum().transpose().array();
  st.umin.resize(cfg.d);
  st.umax.resize(cfg.d);
  st.active.assign(cfg.d, 1);
  st.n_active = cfg.d;
  return st;
}

/// Rebuild a fresh detector state from calibration summaries alone: the
/// stable sample enters only through its per-component mean.
inline DetectorState init_from_summary(Eigen::Index m, Eigen::Index horizon,
                                       const Array& sigma2,
                                       const Array& stable_mean) {
  if (m < 2 || horizon < 1) throw BadDims("need m >= 2 and horizon >= 1");
  if (sigma2.size() != stable_mean.size() || sigma2.size() < 1)
    throw ShapeMismatch("sigma2 and stable_mean must have equal positive size");
  DetectorState st;
  st.m = m;
  st.horizon = horizon;
  st.k = 0;
  st.sigma = sigma2.sqrt();
  st.prefix_sum = stable_mean * static_cast<double>(m);
  st.umin.resize(sigma2.size());
  st.umax.resize(sigma2.size());
  st.active.assign(static_cast<std::size_t>(sigma2.size()), 1);
  st.n_active = sigma2.size();
  return st;
}

/// Consume one observation vector.  Rejected components (strict exceedance
/// w(k/m) E_{m,h}(k) > threshold) are removed from the active set; their
/// state is kept frozen for reporting.
inline StepDecision step(DetectorState& st, const Eigen::Ref<const Vector>& x,
                         double threshold) {
  if (st.k >= st.horizon)
    throw MonitoringEnded("monitoring horizon " + std::to_string(st.horizon) +
                          " already reached");
  const auto d = static_cast<Eigen::Index>(st.active.size());
  if (x.size() != d)
    throw ShapeMismatch("observation has " + std::to_string(x.size()) +
                        " entries for d=" + std::to_string(d));
  if (!x.allFinite()) throw NonFiniteData("observation contains non-finite value");

  const double n_prev = static_cast<double>(st.m + st.k);
  const double n_now = n_prev + 1.0;
  const double sqrt_m = std::sqrt(static_cast<double>(st.m));
  st.k += 1;
  const double w = weight(st.k, st.m);

  StepDecision dec;
  dec.k = st.k;
  for (Eigen::Index h = 0; h < d; ++h) {
    if (!st.active[h]) continue;
    // fold U_{k-1} into the running extremes, then include x
    const double u_prev = st.prefix_sum[h] / n_prev;
    if (st.k == 1) {
      st.umin[h] = u_prev;
      st.umax[h] = u_prev;
    } else {
      st.umin[h] = std::min(st.umin[h], u_prev);
      st.umax[h] = std::max(st.umax[h], u_prev);
    }
    st.prefix_sum[h] += x[h];
    const double u_now = st.prefix_sum[h] / n_now;
    const double dev = std::max(u_now - st.umin[h], st.umax[h] - u_now);
    const double stat = w * n_now * dev / (sqrt_m * st.sigma[h]);
    dec.max_statistic = std::max(dec.max_statistic, stat);
    if (stat > threshold) dec.rejected.push_back(static_cast<int>(h) + 1);
  }
  for (int h : dec.rejected) {
    st.active[h - 1] = 0;
    st.n_active -= 1;
  }
  dec.continue_monitoring = st.k < st.horizon && st.n_active > 0;
  return dec;
}

/// Literal double-loop evaluation of w(k/m) E_{m,h}(k) from a full panel
/// (stable rows on top of monitoring rows).  This is the oracle the
/// incremental engine is checked against; keep it independent of step().
inline double brute_force_statistic(const Matrix& panel, double sigma_h,
                                    Eigen::Index m, Eigen::Index k, int h) {
  if (k < 1) throw BadSpec("brute force statistic needs k >= 1");
  if (panel.rows() < m + k) throw ShapeMismatch("panel too short for m+k rows");
  const Eigen::Index c = h - 1;
  double best = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double mean_pre =
        panel.col(c).head(m + j).sum() / static_cast<double>(m + j);
    const double mean_post = panel.col(c).segment(m + j, k - j).sum() /
                             static_cast<double>(k - j);
    const double val = static_cast<double>(k - j) /
                       (std::sqrt(static_cast<double>(m)) * sigma_h) *
                       std::abs(mean_post - mean_pre);
    best = std::max(best, val);
  }
  return weight(k, m) * best;
}

struct MonitorOptions {
  bool eliminate = true;          // Algorithm-style component removal
  bool stop_on_first_alarm = false;
};

struct MonitorResult {
  std::vector<AlarmEvent> alarms;
  std::vector<int> surviving;     // 1-based surviving components
  Eigen::Index steps_consumed = 0;
  double max_statistic = 0.0;     // running max over all steps
};

/// Run the closed-end monitor over a stream of at most T*m rows.
inline MonitorResult run_monitor(const Matrix& stable, const Matrix& stream,
                                 const MonitorConfig& cfg,
                                 const LrvEstimate& sigma, double threshold,
                                 const MonitorOptions& opts = {}) {
  DetectorState st = init(stable, cfg, sigma);
  if (stream.cols() != cfg.d)
    throw ShapeMismatch("stream has " + std::to_string(stream.cols()) +
                        " columns for d=" + std::to_string(cfg.d));
  if (stream.rows() > st.horizon)
    throw ShapeMismatch("stream longer than the monitoring horizon");

  MonitorResult res;
  for (Eigen::Index r = 0; r < stream.rows(); ++r) {
    StepDecision dec = step(st, stream.row(r).transpose(), threshold);
    res.steps_consumed = dec.k;
    res.max_statistic = std::max(res.max_statistic, dec.max_statistic);
    if (!dec.rejected.empty()) {
      AlarmEvent ev;
      ev.k = dec.k;
      ev.components = dec.rejected;
      ev.statistic = dec.max_statistic;
      ev.threshold = threshold;
      res.alarms.push_back(std::move(ev));
      if (opts.stop_on_first_alarm) break;
      if (!opts.eliminate) {
        // re-arm the rejected components and keep monitoring everything
        for (int h : dec.rejected) {
          st.active[h - 1] = 1;
          st.n_active += 1;
        }
      }
    }
    if (!dec.continue_monitoring && opts.eliminate) break;
  }
  res.surviving = st.active_set();
  return res;
}

}  // namespace seqmon

#endif  // SEQMON_DETECTOR_HPP

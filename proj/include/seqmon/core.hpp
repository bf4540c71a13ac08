#ifndef SEQMON_CORE_HPP
#define SEQMON_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Sequential mean-change monitoring for high-dimensional time series.
//
// Conventions shared by all modules:
//  - panels are Eigen matrices with rows = time, columns = components;
//  - time index t and component index h are 1-based at every public API
//    boundary (storage itself is plain 0-based Eigen).

namespace seqmon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonIntegerHorizon : Error { using Error::Error; };
struct BadAlpha : Error { using Error::Error; };
struct BadDims : Error { using Error::Error; };
struct LagTooLarge : Error { using Error::Error; };
struct BandwidthTooLarge : Error { using Error::Error; };
struct DegenerateComponent : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct MonitoringEnded : Error { using Error::Error; };
struct TooFewReplicates : Error { using Error::Error; };
struct BadSpec : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct DimensionTooSmall : Error { using Error::Error; };
struct NonFiniteData : Error { using Error::Error; };

enum class CalibrationMethod { gumbel, bootstrap };
enum class LrvMethod { standard_truncated, quadratic_spectral };

/// Long-run variance estimation settings.  An unset bandwidth means the
/// default rule H_m = log10(m).
struct LrvConfig {
  LrvMethod method = LrvMethod::quadratic_spectral;
  std::optional<double> bandwidth;
  double floor_fraction = 0.05;

  double bandwidth_for(Eigen::Index m) const {
    if (bandwidth) return *bandwidth;
    return std::log10(static_cast<double>(m));
  }
};

struct MonitorConfig {
  Eigen::Index m = 0;      // stable initial sample size
  Eigen::Index d = 0;      // dimension
  double T = 1.0;          // monitoring length factor; horizon = T*m
  double alpha = 0.05;
  CalibrationMethod calibration = CalibrationMethod::gumbel;
  LrvConfig lrv;
  int bootstrap_n = 2000;
  std::uint64_t seed = 0;

  Eigen::Index horizon() const {
    return static_cast<Eigen::Index>(std::llround(T * static_cast<double>(m)));
  }
};

inline void validate_config(const MonitorConfig& cfg) {
  if (cfg.m < 2 || cfg.d < 1)
    throw BadDims("config requires m >= 2 and d >= 1, got m=" +
                  std::to_string(cfg.m) + " d=" + std::to_string(cfg.d));
  const double n_mon = cfg.T * static_cast<double>(cfg.m);
  if (cfg.T <= 0 || std::abs(n_mon - std::round(n_mon)) > 1e-9 ||
      std::round(n_mon) < 1)
    throw NonIntegerHorizon("T*m must be a positive integer, got T*m=" +
                            std::to_string(n_mon));
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw BadAlpha("alpha must lie in (0,1), got " + std::to_string(cfg.alpha));
}

/// Throws NonFiniteData if any entry is NaN or infinite.  Applied at every
/// ingestion point; a single NaN would otherwise poison the max-statistic.
inline void check_finite(const Matrix& x, const std::string& what) {
  if (!x.allFinite())
    throw NonFiniteData(what + " contains a non-finite value");
}

/// Symmetric long-run correlation matrix with unit diagonal.
struct CorrelationEstimate {
  Matrix rho;

  Eigen::Index dim() const { return rho.rows(); }
  bool is_identity() const { return rho.isIdentity(0.0); }
};

/// One rejection event: at monitoring step k, every listed component's
/// weighted statistic strictly exceeded the threshold.
struct AlarmEvent {
  Eigen::Index k = 0;
  std::vector<int> components;  // 1-based, sorted
  double statistic = 0.0;       // largest exceeding value at this step
  double threshold = 0.0;
};

}  // namespace seqmon

#endif  // SEQMON_CORE_HPP

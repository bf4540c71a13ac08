#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "seqmon/bootstrap.hpp"
#include "seqmon/detector.hpp"
#include "seqmon/rng.hpp"

using namespace seqmon;

namespace {

// literal triple-loop evaluation of the bootstrap statistic
double triple_loop_statistic(const Matrix& panel, Eigen::Index m, double T) {
  const auto n_mon = static_cast<Eigen::Index>(T * m);
  const Eigen::Index d = panel.cols();
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  double best = 0.0;
  for (Eigen::Index k = 1; k <= n_mon; ++k) {
    for (Eigen::Index h = 0; h < d; ++h) {
      for (Eigen::Index j = 0; j < k; ++j) {
        double pre = 0.0;
        for (Eigen::Index t = 0; t < m + j; ++t) pre += panel(t, h);
        pre /= static_cast<double>(m + j);
        double post = 0.0;
        for (Eigen::Index t = m + j; t < m + k; ++t) post += panel(t, h);
        post /= static_cast<double>(k - j);
        const double v =
            weight(k, m) * static_cast<double>(k - j) / sqrt_m * std::abs(post - pre);
        best = std::max(best, v);
      }
    }
  }
  return best;
}

MonitorConfig boot_cfg(Eigen::Index m, Eigen::Index d, double T, int N,
                       std::uint64_t seed, double alpha = 0.05) {
  MonitorConfig cfg;
  cfg.m = m;
  cfg.d = d;
  cfg.T = T;
  cfg.alpha = alpha;
  cfg.bootstrap_n = N;
  cfg.seed = seed;
  cfg.calibration = CalibrationMethod::bootstrap;
  return cfg;
}

}  // namespace

TEST_CASE("psd_repair: identity passes through") {
  CorrelationEstimate rho;
  rho.rho = Matrix::Identity(4, 4);
  const PsdRepair rep = psd_repair(rho);
  CHECK(!rep.applied);
  CHECK((rep.rho.rho - rho.rho).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("psd_repair: rank-deficient matrix gets a valid repair") {
  CorrelationEstimate rho;
  rho.rho.resize(2, 2);
  rho.rho << 1.0, 1.0, 1.0, 1.0;
  const PsdRepair rep = psd_repair(rho);
  CHECK(rep.applied);
  CHECK(rep.rho.rho(0, 0) == 1.0);
  CHECK(rep.rho.rho(0, 1) < 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(rep.rho.rho);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("psd_repair: a valid correlation matrix is left alone") {
  CorrelationEstimate rho;
  rho.rho.resize(3, 3);
  rho.rho << 1.0, 0.4, 0.1, 0.4, 1.0, -0.3, 0.1, -0.3, 1.0;
  const PsdRepair rep = psd_repair(rho);
  CHECK((rep.rho.rho - rho.rho).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gen_replicate: identity factor gives independent standard normals") {
  const Eigen::Index n = 20000;
  std::mt19937_64 rng = make_stream(21, 0);
  const Matrix panel = gen_replicate(Matrix::Identity(3, 3), n, rng);
  for (Eigen::Index h = 0; h < 3; ++h) {
    const double var = (panel.col(h).array() - panel.col(h).mean()).square().mean();
    CHECK(std::abs(var - 1.0) < 3.0 / std::sqrt(static_cast<double>(n)) + 0.02);
  }
}

TEST_CASE("gen_replicate: cross correlation follows the factor") {
  const Eigen::Index n = 10000;
  Matrix rho(2, 2);
  rho << 1.0, 0.9, 0.9, 1.0;
  const Matrix chol = Eigen::LLT<Matrix>(rho).matrixL();
  std::mt19937_64 rng = make_stream(22, 0);
  const Matrix panel = gen_replicate(chol, n, rng);
  const Vector a = panel.col(0).array() - panel.col(0).mean();
  const Vector b = panel.col(1).array() - panel.col(1).mean();
  const double corr = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
  CHECK(std::abs(corr - 0.9) < 0.05);
}

TEST_CASE("gen_replicate: fixed seed is bit identical") {
  std::mt19937_64 a = make_stream(23, 5), b = make_stream(23, 5);
  const Matrix x = gen_replicate(Matrix::Identity(4, 4), 50, a);
  const Matrix y = gen_replicate(Matrix::Identity(4, 4), 50, b);
  CHECK((x - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bootstrap_statistic: zero panel and shape errors") {
  CHECK(bootstrap_statistic(Matrix::Zero(20, 3), 10, 1.0) == 0.0);
  CHECK_THROWS_AS(bootstrap_statistic(Matrix::Zero(19, 3), 10, 1.0), ShapeMismatch);
}

TEST_CASE("bootstrap_statistic equals the literal triple loop") {
  std::mt19937_64 rng = make_stream(24, 0);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 25; ++rep) {
    const Eigen::Index m = 5 + static_cast<Eigen::Index>(rng() % 16);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 3);
    const double T = 1.0;
    Matrix panel(2 * m, d);
    for (Eigen::Index t = 0; t < panel.rows(); ++t)
      for (Eigen::Index h = 0; h < d; ++h) panel(t, h) = normal(rng);
    CHECK(bootstrap_statistic(panel, m, T) ==
          doctest::Approx(triple_loop_statistic(panel, m, T)).epsilon(1e-10));
  }
}

TEST_CASE("bootstrap_statistic agrees with a unit-sigma detector run") {
  std::mt19937_64 rng = make_stream(25, 0);
  std::normal_distribution<double> normal;
  const Eigen::Index m = 15, d = 3;
  Matrix panel(2 * m, d);
  for (Eigen::Index t = 0; t < panel.rows(); ++t)
    for (Eigen::Index h = 0; h < d; ++h) panel(t, h) = normal(rng);

  MonitorConfig cfg;
  cfg.m = m;
  cfg.d = d;
  cfg.T = 1.0;
  LrvEstimate sig;
  sig.sigma2 = Array::Ones(d);
  const MonitorResult res = run_monitor(panel.topRows(m), panel.bottomRows(m), cfg,
                                        sig, 1e18);
  CHECK(bootstrap_statistic(panel, m, 1.0) ==
        doctest::Approx(res.max_statistic).epsilon(1e-12));
}

TEST_CASE("calibrate_bootstrap: N=100 quantile is the 95th order statistic") {
  const MonitorConfig cfg = boot_cfg(10, 3, 1.0, 100, 77);
  CorrelationEstimate rho;
  rho.rho = Matrix::Identity(3, 3);
  const BootstrapQuantile bq = calibrate_bootstrap(rho, cfg);

  const Scaling s = scaling(3, 1.0);
  std::vector<double> stats(100);
  for (int n = 0; n < 100; ++n) {
    std::mt19937_64 rng = make_stream(77, n);
    Matrix panel = gen_replicate(Matrix::Identity(3, 3), 20, rng);
    stats[n] = s.a_d * (bootstrap_statistic(panel, 10, 1.0) - s.b_d);
  }
  std::sort(stats.begin(), stats.end());
  CHECK(bq.q_value == doctest::Approx(stats[94]).epsilon(1e-12));
  CHECK(bq.threshold == doctest::Approx(bq.q_value / s.a_d + s.b_d).epsilon(1e-12));
}

TEST_CASE("calibrate_bootstrap: deterministic and replicate-count checked") {
  const MonitorConfig cfg = boot_cfg(8, 2, 1.0, 200, 31);
  CorrelationEstimate rho;
  rho.rho = Matrix::Identity(2, 2);
  const BootstrapQuantile a = calibrate_bootstrap(rho, cfg);
  const BootstrapQuantile b = calibrate_bootstrap(rho, cfg);
  CHECK(a.q_value == b.q_value);

  MonitorConfig too_few = cfg;
  too_few.bootstrap_n = 50;
  CHECK_THROWS_AS(calibrate_bootstrap(rho, too_few), TooFewReplicates);
}

TEST_CASE("bootstrap quantile is invariant under component relabeling") {
  Matrix rho(3, 3);
  rho << 1.0, 0.6, 0.2, 0.6, 1.0, 0.4, 0.2, 0.4, 1.0;
  // permutation (2 3 1)
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(3);
  perm.indices() << 1, 2, 0;
  CorrelationEstimate r1{rho};
  CorrelationEstimate r2{perm.transpose() * rho * perm};

  // compare distributions, not per-replicate draws: permuting rho permutes the
  // Cholesky-driven draws, so use a KS-style check on the replicate samples
  const MonitorConfig cfg = boot_cfg(10, 3, 1.0, 800, 55, 0.10);
  const BootstrapQuantile a = calibrate_bootstrap(r1, cfg);
  const BootstrapQuantile b = calibrate_bootstrap(r2, cfg);
  CHECK(a.threshold == doctest::Approx(b.threshold).epsilon(0.08));
}

TEST_CASE("studentized calibration sits above the plain quantile at small m") {
  // re-estimating the variances inside each replicate adds the same noise the
  // real statistic carries, which pushes the upper quantile out
  const Eigen::Index d = 100;
  const MonitorConfig cfg = boot_cfg(50, d, 1.0, 400, 47);
  CorrelationEstimate rho;
  rho.rho = Matrix::Identity(d, d);
  const LrvConfig lrv;
  const BootstrapQuantile plain = calibrate_bootstrap(rho, cfg);
  const BootstrapQuantile stud = calibrate_bootstrap(rho, cfg, &lrv);
  CHECK(stud.threshold > plain.threshold);
  const BootstrapQuantile stud2 = calibrate_bootstrap(rho, cfg, &lrv);
  CHECK(stud.q_value == stud2.q_value);
}

TEST_CASE("replicate rows are temporally independent") {
  const Eigen::Index n = 10000;
  std::mt19937_64 rng = make_stream(26, 0);
  Matrix rho(2, 2);
  rho << 1.0, 0.5, 0.5, 1.0;
  const Matrix chol = Eigen::LLT<Matrix>(rho).matrixL();
  const Matrix panel = gen_replicate(chol, n, rng);
  for (Eigen::Index h = 0; h < 2; ++h) {
    const Vector c = panel.col(h).array() - panel.col(h).mean();
    const double lag1 = c.tail(n - 1).dot(c.head(n - 1)) / c.squaredNorm();
    CHECK(std::abs(lag1) < 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("bootstrap threshold approaches the Gumbel threshold for identity rho"
          * doctest::timeout(300)) {
  const Eigen::Index d = 200;
  const MonitorConfig cfg = boot_cfg(100, d, 1.0, 2000, 99);
  CorrelationEstimate rho;
  rho.rho = Matrix::Identity(d, d);
  const BootstrapQuantile bq = calibrate_bootstrap(rho, cfg);
  const double gum = gumbel_threshold(d, 1.0, 0.05);
  // extreme-value convergence in d is slow, so the finite-sample quantile
  // sits visibly below the conservative asymptotic threshold
  CHECK(bq.threshold < gum);
  CHECK(std::abs(bq.threshold - gum) < 0.30);
}

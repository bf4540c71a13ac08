#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "seqmon/detector.hpp"
#include "seqmon/rng.hpp"
#include "seqmon/thresholds.hpp"

using namespace seqmon;

namespace {

LrvEstimate unit_sigma(Eigen::Index d) {
  LrvEstimate s;
  s.sigma2 = Array::Ones(d);
  return s;
}

MonitorConfig make_cfg(Eigen::Index m, Eigen::Index d, double T = 1.0) {
  MonitorConfig cfg;
  cfg.m = m;
  cfg.d = d;
  cfg.T = T;
  return cfg;
}

Matrix random_panel(Eigen::Index rows, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix x(rows, d);
  for (Eigen::Index t = 0; t < rows; ++t)
    for (Eigen::Index h = 0; h < d; ++h) x(t, h) = normal(rng);
  return x;
}

}  // namespace

TEST_CASE("init: prefix sums and shape checks") {
  Matrix stable(3, 1);
  stable << 1, 2, 3;
  DetectorState st = init(stable, make_cfg(3, 1), unit_sigma(1));
  CHECK(st.k == 0);
  CHECK(st.prefix_sum[0] == doctest::Approx(6.0));
  CHECK(st.n_active == 1);

  CHECK_THROWS_AS(init(stable, make_cfg(3, 1), unit_sigma(2)), ShapeMismatch);
  CHECK_THROWS_AS(init(stable, make_cfg(4, 1), unit_sigma(1)), ShapeMismatch);
  Matrix empty(0, 0);
  CHECK_THROWS_AS(init(empty, make_cfg(3, 1), unit_sigma(1)), ShapeMismatch);
}

TEST_CASE("step: hand-evaluated first tick, m=2") {
  // stable = (0,0), sigma = 1, observe c at k=1:
  // statistic = w(1/2) * c/sqrt(2) = (2/3) c / sqrt(2)
  Matrix stable = Matrix::Zero(2, 1);
  for (double c : {0.5, 1.0, 3.7}) {
    DetectorState st = init(stable, make_cfg(2, 1), unit_sigma(1));
    Vector x(1);
    x << c;
    const StepDecision dec = step(st, x, 1e18);
    CHECK(dec.k == 1);
    CHECK(dec.max_statistic ==
          doctest::Approx((2.0 / 3.0) * c / std::sqrt(2.0)).epsilon(1e-13));
    CHECK(st.umin[0] == doctest::Approx(0.0));
    CHECK(st.umax[0] == doctest::Approx(0.0));
  }
}

TEST_CASE("constant data never rejects for positive threshold") {
  Matrix stable = Matrix::Constant(5, 2, 4.2);
  MonitorConfig cfg = make_cfg(5, 2, 2.0);
  DetectorState st = init(stable, cfg, unit_sigma(2));
  Vector x = Vector::Constant(2, 4.2);
  for (int k = 0; k < 10; ++k) {
    const StepDecision dec = step(st, x, 1e-12);
    CHECK(dec.max_statistic == doctest::Approx(0.0));
    CHECK(dec.rejected.empty());
  }
}

TEST_CASE("step errors") {
  Matrix stable = Matrix::Zero(3, 1);
  MonitorConfig cfg = make_cfg(3, 1);
  DetectorState st = init(stable, cfg, unit_sigma(1));
  Vector x(1);
  x << 1.0;
  for (int k = 0; k < 3; ++k) step(st, x, 1e18);
  CHECK_THROWS_AS(step(st, x, 1e18), MonitoringEnded);

  DetectorState st2 = init(stable, cfg, unit_sigma(1));
  Vector bad(1);
  bad << std::nan("");
  CHECK_THROWS_AS(step(st2, bad, 1e18), NonFiniteData);
}

TEST_CASE("incremental statistic equals the literal double loop") {
  std::mt19937_64 rng = make_stream(101, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index m = 5 + static_cast<Eigen::Index>(rng() % 20);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 4);
    const double T = (rng() % 2) ? 1.0 : 2.0;
    const auto n_mon = static_cast<Eigen::Index>(T * m);
    const Matrix panel = random_panel(m + n_mon, d, rng);
    LrvEstimate sig;
    sig.sigma2 = Array::Random(d).abs() + 0.5;

    MonitorConfig cfg = make_cfg(m, d, T);
    DetectorState st = init(panel.topRows(m), cfg, sig);
    for (Eigen::Index k = 1; k <= n_mon; ++k) {
      step(st, panel.row(m + k - 1).transpose(), 1e18);
      for (int h = 1; h <= d; ++h) {
        // recompute this component's statistic from frozen state
        const double n_now = static_cast<double>(m + k);
        const double u = st.prefix_sum[h - 1] / n_now;
        const double dev = std::max(u - st.umin[h - 1], st.umax[h - 1] - u);
        const double inc = weight(k, m) * n_now * dev /
                           (std::sqrt(static_cast<double>(m)) * st.sigma[h - 1]);
        const double bf = brute_force_statistic(panel, st.sigma[h - 1], m, k, h);
        CHECK(inc == doctest::Approx(bf).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("scale equivariance of decisions") {
  std::mt19937_64 rng = make_stream(102, 0);
  const Eigen::Index m = 20, d = 3;
  const Matrix panel = random_panel(2 * m, d, rng);
  LrvEstimate sig = unit_sigma(d);

  Matrix scaled = panel;
  scaled.col(1) *= 100.0;
  LrvEstimate sig_scaled = sig;
  sig_scaled.sigma2[1] = 100.0 * 100.0;

  MonitorConfig cfg = make_cfg(m, d);
  const double thr = 1.3;
  MonitorResult a = run_monitor(panel.topRows(m), panel.bottomRows(m), cfg, sig, thr);
  MonitorResult b =
      run_monitor(scaled.topRows(m), scaled.bottomRows(m), cfg, sig_scaled, thr);
  REQUIRE(a.alarms.size() == b.alarms.size());
  for (std::size_t i = 0; i < a.alarms.size(); ++i) {
    CHECK(a.alarms[i].k == b.alarms[i].k);
    CHECK(a.alarms[i].components == b.alarms[i].components);
  }
  CHECK(a.surviving == b.surviving);
}

TEST_CASE("run_monitor: null stream with huge threshold") {
  std::mt19937_64 rng = make_stream(103, 0);
  const Eigen::Index m = 30, d = 4;
  const Matrix panel = random_panel(2 * m, d, rng);
  MonitorResult res = run_monitor(panel.topRows(m), panel.bottomRows(m),
                                  make_cfg(m, d), unit_sigma(d), 1e18);
  CHECK(res.alarms.empty());
  CHECK(res.surviving == std::vector<int>{1, 2, 3, 4});
  CHECK(res.steps_consumed == m);
}

TEST_CASE("run_monitor: threshold zero alarms at k=1 on any noise") {
  std::mt19937_64 rng = make_stream(104, 0);
  const Eigen::Index m = 30, d = 4;
  const Matrix panel = random_panel(2 * m, d, rng);
  MonitorResult res = run_monitor(panel.topRows(m), panel.bottomRows(m),
                                  make_cfg(m, d), unit_sigma(d), 0.0);
  REQUIRE(!res.alarms.empty());
  CHECK(res.alarms.front().k == 1);
  CHECK(res.alarms.front().components.size() == 4);  // all nonzero statistics
}

TEST_CASE("run_monitor: big single-component jump is caught and eliminated") {
  std::mt19937_64 rng = make_stream(105, 0);
  const Eigen::Index m = 100, d = 5;
  int detected = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Matrix panel = random_panel(2 * m, d, rng);
    panel.col(2).tail(m / 2).array() += 10.0;  // jump in component 3 at k*=m/2
    MonitorResult res =
        run_monitor(panel.topRows(m), panel.bottomRows(m), make_cfg(m, d),
                    unit_sigma(d), gumbel_threshold(d, 1.0, 0.05));
    bool hit = false;
    for (const auto& ev : res.alarms)
      for (int h : ev.components)
        if (h == 3) hit = true;
    detected += hit;
  }
  CHECK(detected == 20);
}

TEST_CASE("surviving set equals complement of alarm unions") {
  std::mt19937_64 rng = make_stream(106, 0);
  const Eigen::Index m = 40, d = 6;
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix panel = random_panel(2 * m, d, rng);
    MonitorResult res = run_monitor(panel.topRows(m), panel.bottomRows(m),
                                    make_cfg(m, d), unit_sigma(d), 1.5);
    std::vector<char> gone(d + 1, 0);
    for (const auto& ev : res.alarms)
      for (int h : ev.components) {
        CHECK(!gone[h]);  // a component can be eliminated at most once
        gone[h] = 1;
      }
    std::vector<int> expect;
    for (int h = 1; h <= d; ++h)
      if (!gone[h]) expect.push_back(h);
    CHECK(res.surviving == expect);
  }
}

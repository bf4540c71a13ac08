// seqmon: sequential mean-change monitoring for high-dimensional streams.
//
// Subcommands:
//   calibrate  estimate long-run variances and a threshold from a stable CSV
//   monitor    consume a stream and emit JSONL alarm events
//   simulate   Monte Carlo size/power experiments

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "seqmon/bootstrap.hpp"
#include "seqmon/core.hpp"
#include "seqmon/detector.hpp"
#include "seqmon/io.hpp"
#include "seqmon/lrv.hpp"
#include "seqmon/simlab.hpp"
#include "seqmon/thresholds.hpp"

using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "seqmon 1.0.0";

struct CommonFlags {
  double T = 1.0;
  double alpha = 0.05;
  std::string method = "gumbel";
  bool independent = false;
  std::string lrv = "qs";
  std::optional<double> bandwidth;
  int replicates = 2000;
  std::uint64_t seed = 0;
};

seqmon::LrvConfig make_lrv(const CommonFlags& f) {
  seqmon::LrvConfig cfg;
  cfg.method = f.lrv == "standard" ? seqmon::LrvMethod::standard_truncated
                                   : seqmon::LrvMethod::quadratic_spectral;
  cfg.bandwidth = f.bandwidth;
  return cfg;
}

void check_degenerate(const seqmon::Matrix& stable) {
  std::vector<int> bad;
  for (int h = 1; h <= stable.cols(); ++h) {
    const seqmon::Vector c = stable.col(h - 1);
    if ((c.array() - c.mean()).abs().maxCoeff() == 0.0) bad.push_back(h);
  }
  if (!bad.empty()) {
    std::string msg = "degenerate (constant) columns:";
    for (int h : bad) msg += " " + std::to_string(h);
    throw seqmon::DegenerateComponent(msg);
  }
}

int cmd_calibrate(const std::string& input, bool header, const CommonFlags& f,
                  std::optional<double> user_threshold, const std::string& out_path) {
  const seqmon::Matrix stable = seqmon::read_csv_file(input, header);
  check_degenerate(stable);

  seqmon::MonitorConfig cfg;
  cfg.m = stable.rows();
  cfg.d = stable.cols();
  cfg.T = f.T;
  cfg.alpha = f.alpha;
  cfg.lrv = make_lrv(f);
  cfg.bootstrap_n = f.replicates;
  cfg.seed = f.seed;
  cfg.calibration = f.method == "bootstrap" ? seqmon::CalibrationMethod::bootstrap
                                            : seqmon::CalibrationMethod::gumbel;
  seqmon::validate_config(cfg);

  const seqmon::LrvEstimate sigma = seqmon::estimate_lrv(stable, cfg.lrv);

  seqmon::CalibrationFile cal;
  cal.m = cfg.m;
  cal.d = cfg.d;
  cal.T = cfg.T;
  cal.alpha = cfg.alpha;
  cal.method = cfg.calibration;
  cal.lrv = cfg.lrv.method;
  cal.bandwidth = cfg.lrv.bandwidth_for(cfg.m);
  cal.floor_fraction = cfg.lrv.floor_fraction;
  cal.sigma2 = sigma.sigma2;
  cal.floored = sigma.floored;
  cal.stable_mean = stable.colwise().mean().transpose().array();

  if (user_threshold) {
    cal.threshold = *user_threshold;
  } else if (cfg.calibration == seqmon::CalibrationMethod::gumbel) {
    if (cfg.d < 2)
      throw seqmon::DimensionTooSmall(
          "Gumbel calibration needs d >= 2; use --method bootstrap or --threshold");
    cal.threshold = seqmon::gumbel_threshold(cfg.d, cfg.T, cfg.alpha);
  } else {
    seqmon::CorrelationEstimate rho;
    if (f.independent)
      rho.rho = seqmon::Matrix::Identity(cfg.d, cfg.d);
    else
      rho = seqmon::correlation_matrix(stable, cfg.lrv);
    const seqmon::BootstrapQuantile bq = seqmon::calibrate_bootstrap(rho, cfg);
    cal.threshold = bq.threshold;
    cal.replicates = bq.n_replicates;
    cal.seed = bq.seed;
    cal.q_value = bq.q_value;
    cal.psd_repair_applied = bq.psd_repair_applied;
    cal.min_eigen_clipped = bq.min_eigen_clipped;
    cal.rho_digest = seqmon::fnv1a64(rho.rho.data(),
                                     sizeof(double) * rho.rho.size());
  }

  if (out_path.empty() || out_path == "-") {
    seqmon::write_calibration(std::cout, cal);
  } else {
    std::ofstream out(out_path);
    if (!out) throw seqmon::ParseError("cannot write '" + out_path + "'");
    seqmon::write_calibration(out, cal);
  }
  return 0;
}

int cmd_monitor(const std::string& cal_path, const std::string& input, bool header,
                const std::string& out_path, bool stop_on_first, bool no_eliminate) {
  const seqmon::CalibrationFile cal = seqmon::read_calibration_file(cal_path);
  const auto horizon = static_cast<Eigen::Index>(
      std::llround(cal.T * static_cast<double>(cal.m)));
  seqmon::DetectorState st =
      seqmon::init_from_summary(cal.m, horizon, cal.sigma2, cal.stable_mean);

  std::ifstream fin;
  std::istream* in = &std::cin;
  if (input != "-") {
    fin.open(input);
    if (!fin) throw seqmon::ParseError("cannot open '" + input + "'");
    in = &fin;
  }
  std::ofstream fout;
  std::ostream* out = &std::cout;
  if (!out_path.empty() && out_path != "-") {
    fout.open(out_path);
    if (!fout) throw seqmon::ParseError("cannot write '" + out_path + "'");
    out = &fout;
  }

  int n_alarms = 0;
  std::string line;
  Eigen::Index lineno = 0;
  seqmon::Vector x(cal.d);
  while (std::getline(*in, line)) {
    ++lineno;
    if (header && lineno == 1) continue;
    if (line.empty() || line == "\r") continue;
    if (st.k >= st.horizon)
      throw seqmon::ShapeMismatch("stream longer than monitoring horizon T*m=" +
                                  std::to_string(st.horizon));
    std::istringstream ss(line);
    seqmon::Matrix row;
    try {
      row = seqmon::read_csv(ss, false);
    } catch (const seqmon::ParseError& e) {
      throw seqmon::ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (row.cols() != cal.d)
      throw seqmon::ShapeMismatch("line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(cal.d) + " values, got " +
                                  std::to_string(row.cols()));
    x = row.row(0).transpose();
    const seqmon::StepDecision dec = seqmon::step(st, x, cal.threshold);
    if (!dec.rejected.empty()) {
      ++n_alarms;
      json ev;
      ev["k"] = dec.k;
      ev["components"] = dec.rejected;
      ev["statistic"] = dec.max_statistic;
      ev["threshold"] = cal.threshold;
      *out << ev.dump() << "\n" << std::flush;
      if (stop_on_first) break;
      if (no_eliminate) {
        for (int h : dec.rejected) {
          st.active[h - 1] = 1;
          st.n_active += 1;
        }
      }
    }
    if (st.n_active == 0 && !no_eliminate) break;
  }

  json summary;
  summary["alarms"] = n_alarms;
  summary["surviving_set"] = st.active_set();
  summary["steps_consumed"] = st.k;
  *out << summary.dump() << "\n";
  return n_alarms > 0 ? 1 : 0;
}

struct SimFlags {
  std::string model = "M4";
  Eigen::Index m = 100;
  Eigen::Index d = 100;
  int runs = 200;
  double delta = 0.0;
  std::string affected = "A1";
  Eigen::Index kstar = -1;
  std::string out;
  std::string table1_cell;
};

int cmd_simulate(const CommonFlags& f, const SimFlags& s) {
  if (s.runs < 1) throw seqmon::BadSpec("--runs must be >= 1");
  seqmon::DgpSpec dgp;
  dgp.m = s.m;
  dgp.d = s.d;
  dgp.T = f.T;
  dgp.seed = f.seed;
  std::string model = s.model;
  if (!s.table1_cell.empty()) {
    // e.g. "M4,m=500,d=500,T=1"
    std::istringstream ss(s.table1_cell);
    std::string tok;
    bool first = true;
    seqmon::DgpSpec parsed = dgp;
    while (std::getline(ss, tok, ',')) {
      if (first) {
        model = tok;
        first = false;
      } else if (tok.rfind("m=", 0) == 0) parsed.m = std::atoll(tok.c_str() + 2);
      else if (tok.rfind("d=", 0) == 0) parsed.d = std::atoll(tok.c_str() + 2);
      else if (tok.rfind("T=", 0) == 0) parsed.T = std::atof(tok.c_str() + 2);
      else throw seqmon::BadSpec("cannot parse table1 cell token '" + tok + "'");
    }
    dgp = parsed;
  }
  dgp.model = seqmon::model_from_string(model);

  seqmon::MonitorConfig cfg;
  cfg.m = dgp.m;
  cfg.d = dgp.d;
  cfg.T = dgp.T;
  cfg.alpha = f.alpha;
  cfg.lrv = make_lrv(f);
  cfg.bootstrap_n = f.replicates;
  cfg.seed = f.seed;
  cfg.calibration = f.method == "bootstrap" ? seqmon::CalibrationMethod::bootstrap
                                            : seqmon::CalibrationMethod::gumbel;
  seqmon::McOptions opts;
  opts.bootstrap_independent = f.independent;

  seqmon::McResult res;
  std::optional<seqmon::ChangeSpec> change;
  if (s.delta != 0.0) {
    change = seqmon::ChangeSpec::preset(s.affected, dgp.d, s.delta, s.kstar);
    res = seqmon::mc_power(dgp, *change, cfg, s.runs, opts);
  } else {
    res = seqmon::mc_size(dgp, cfg, s.runs, opts);
  }

  std::ostringstream csv;
  csv << "model,m,d,T,method,alpha,delta,affected,rate,ci_lo,ci_hi,runs,seed\n";
  csv << model << ',' << dgp.m << ',' << dgp.d << ',' << seqmon::format_double(dgp.T)
      << ',' << f.method << (f.independent ? "-independent" : "") << ','
      << seqmon::format_double(f.alpha) << ',' << seqmon::format_double(s.delta)
      << ',' << (change ? s.affected : std::string("-")) << ','
      << seqmon::format_double(res.rate) << ',' << seqmon::format_double(res.ci_lo)
      << ',' << seqmon::format_double(res.ci_hi) << ',' << res.runs << ','
      << f.seed << '\n';

  std::ostringstream table;
  table << "model  m      d      T    method     rate     95% CI\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-6s %-6lld %-6lld %-4g %-10s %5.1f%%  [%.1f%%, %.1f%%]\n",
                model.c_str(), static_cast<long long>(dgp.m),
                static_cast<long long>(dgp.d), dgp.T,
                (f.method + (f.independent ? "-ind" : "")).c_str(), 100.0 * res.rate,
                100.0 * res.ci_lo, 100.0 * res.ci_hi);
  table << buf;
  if (change && !std::isnan(res.mean_delay))
    table << "mean detection delay among rejecting runs: " << res.mean_delay << "\n";

  std::cout << table.str();
  if (!s.out.empty()) {
    {
      std::ofstream out(s.out + ".csv");
      if (!out) throw seqmon::ParseError("cannot write '" + s.out + ".csv'");
      out << csv.str();
    }
    json manifest;
    manifest["version"] = kVersion;
    manifest["command"] = "simulate";
    manifest["model"] = model;
    manifest["m"] = dgp.m;
    manifest["d"] = dgp.d;
    manifest["T"] = dgp.T;
    manifest["alpha"] = f.alpha;
    manifest["method"] = f.method;
    manifest["independent"] = f.independent;
    manifest["lrv"] = f.lrv;
    manifest["replicates"] = f.replicates;
    manifest["runs"] = s.runs;
    manifest["seed"] = f.seed;
    manifest["delta"] = s.delta;
    manifest["affected"] = change ? s.affected : "";
    manifest["threshold"] = res.threshold;
    manifest["rate"] = res.rate;
    std::ofstream mout(s.out + ".manifest.json");
    if (!mout) throw seqmon::ParseError("cannot write manifest");
    mout << manifest.dump(2) << "\n";
  } else {
    std::cout << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential mean-change monitoring for high-dimensional time series"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonFlags f;
  auto add_common = [&](CLI::App* sub, bool with_boot) {
    sub->add_option("--T", f.T, "monitoring length factor (horizon = T*m)");
    sub->add_option("--alpha", f.alpha, "test level in (0,1)");
    sub->add_option("--method", f.method, "calibration: gumbel or bootstrap")
        ->check(CLI::IsMember({"gumbel", "bootstrap"}));
    sub->add_option("--lrv", f.lrv, "long-run variance estimator: standard or qs")
        ->check(CLI::IsMember({"standard", "qs"}));
    sub->add_option("--bandwidth", f.bandwidth,
                    "LRV bandwidth H (default: log10(m))");
    sub->add_option("--seed", f.seed, "RNG seed");
    if (with_boot) {
      sub->add_flag("--independent", f.independent,
                    "bootstrap with identity spatial correlation");
      sub->add_option("--replicates", f.replicates, "bootstrap replicate count");
    }
  };

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "calibrate a threshold from a stable CSV");
  std::string cal_input, cal_out;
  bool cal_header = false;
  std::optional<double> user_threshold;
  cal->add_option("stable", cal_input, "CSV of the stable initial sample")->required();
  cal->add_flag("--header", cal_header, "input has a single header row");
  cal->add_option("-o,--output", cal_out, "calibration file ('-' = stdout)");
  cal->add_option("--threshold", user_threshold, "user-supplied threshold override");
  add_common(cal, true);

  // monitor
  auto* mon = app.add_subcommand("monitor", "monitor a stream against a calibration");
  std::string mon_cal, mon_input = "-", mon_out;
  bool mon_header = false, stop_on_first = false, no_eliminate = false;
  mon->add_option("calibration", mon_cal, "calibration file from 'calibrate'")->required();
  mon->add_option("-i,--input", mon_input, "stream CSV ('-' = stdin)");
  mon->add_option("-o,--output", mon_out, "JSONL output ('-' = stdout)");
  mon->add_flag("--header", mon_header, "stream has a single header row");
  mon->add_flag("--stop-on-first-alarm", stop_on_first, "halt at the first alarm");
  mon->add_flag("--no-eliminate", no_eliminate,
                "keep rejected components under monitoring");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo size/power experiments");
  SimFlags s;
  sim->add_option("--model", s.model, "DGP: M1, M2, M3 or M4");
  sim->add_option("--m", s.m, "stable sample size");
  sim->add_option("--d", s.d, "dimension");
  sim->add_option("--runs", s.runs, "Monte Carlo run count");
  sim->add_option("--delta", s.delta, "mean shift size (0 = size experiment)");
  sim->add_option("--affected", s.affected, "affected set: A1, A2 or A3")
      ->check(CLI::IsMember({"A1", "A2", "A3"}));
  sim->add_option("--kstar", s.kstar, "change time (default m/2)");
  sim->add_option("--out", s.out, "output prefix for CSV + manifest");
  sim->add_option("--table1-cell", s.table1_cell,
                  "cell shorthand, e.g. M4,m=500,d=500,T=1");
  add_common(sim, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cal) return cmd_calibrate(cal_input, cal_header, f, user_threshold, cal_out);
    if (*mon) return cmd_monitor(mon_cal, mon_input, mon_header, mon_out,
                                 stop_on_first, no_eliminate);
    if (*sim) return cmd_simulate(f, s);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

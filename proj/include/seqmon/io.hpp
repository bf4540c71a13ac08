#ifndef SEQMON_IO_HPP
#define SEQMON_IO_HPP

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqmon/core.hpp"
#include "seqmon/rng.hpp"

// CSV ingestion and the calibration file format.  Floats are written with 17
// significant digits so values round-trip bit-exactly through text.

namespace seqmon {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline double parse_double(const std::string& tok, Eigen::Index row, Eigen::Index col) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  // trailing whitespace is tolerated, anything else is not
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == s || (end && *end != '\0'))
    throw ParseError("row " + std::to_string(row) + " col " + std::to_string(col) +
                     ": cannot parse '" + tok + "' as a number");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace detail

/// Read a comma-separated numeric panel (rows = time, columns = components).
/// '.' decimal point, locale independent; an optional single header row is
/// skipped when has_header is set.
inline Matrix read_csv(std::istream& in, bool has_header = false) {
  std::vector<std::vector<double>> rows;
  std::string line;
  Eigen::Index lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (has_header && lineno == 1) continue;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (width < 0) width = static_cast<Eigen::Index>(fields.size());
    if (static_cast<Eigen::Index>(fields.size()) != width)
      throw ParseError("row " + std::to_string(lineno) + ": expected " +
                       std::to_string(width) + " fields, got " +
                       std::to_string(fields.size()));
    std::vector<double> vals(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      vals[c] = detail::parse_double(fields[c], lineno,
                                     static_cast<Eigen::Index>(c) + 1);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("empty CSV input");
  Matrix x(static_cast<Eigen::Index>(rows.size()), width);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < width; ++c) x(r, c) = rows[r][c];
  check_finite(x, "CSV input");
  return x;
}

inline Matrix read_csv_file(const std::string& path, bool has_header = false) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv(in, has_header);
}

inline void write_csv(std::ostream& out, const Matrix& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (c) out << ',';
      out << format_double(x(r, c));
    }
    out << '\n';
  }
}

/// 64-bit content digest of a file, for run manifests.
inline std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

/// Everything cmd_monitor needs to run without re-reading the stable sample.
struct CalibrationFile {
  Eigen::Index m = 0;
  Eigen::Index d = 0;
  double T = 1.0;
  double alpha = 0.05;
  CalibrationMethod method = CalibrationMethod::gumbel;
  LrvMethod lrv = LrvMethod::quadratic_spectral;
  double bandwidth = 0.0;       // the H that was actually used
  double floor_fraction = 0.05;
  double threshold = 0.0;
  Array sigma2;                 // d long-run variances
  Array stable_mean;            // d stable-sample means
  std::vector<int> floored;     // components where the positivity floor fired
  // bootstrap-only fields
  int replicates = 0;
  std::uint64_t seed = 0;
  double q_value = 0.0;
  bool psd_repair_applied = false;
  std::optional<double> min_eigen_clipped;
  std::uint64_t rho_digest = 0;
};

inline void write_calibration(std::ostream& out, const CalibrationFile& c) {
  out << "seqmon-calibration v1\n";
  out << "method " << (c.method == CalibrationMethod::gumbel ? "gumbel" : "bootstrap") << '\n';
  out << "m " << c.m << '\n';
  out << "d " << c.d << '\n';
  out << "T " << format_double(c.T) << '\n';
  out << "alpha " << format_double(c.alpha) << '\n';
  out << "lrv " << (c.lrv == LrvMethod::quadratic_spectral ? "qs" : "standard") << '\n';
  out << "bandwidth " << format_double(c.bandwidth) << '\n';
  out << "floor_fraction " << format_double(c.floor_fraction) << '\n';
  out << "threshold " << format_double(c.threshold) << '\n';
  out << "sigma2";
  for (Eigen::Index h = 0; h < c.sigma2.size(); ++h) out << ' ' << format_double(c.sigma2[h]);
  out << '\n';
  out << "stable_mean";
  for (Eigen::Index h = 0; h < c.stable_mean.size(); ++h)
    out << ' ' << format_double(c.stable_mean[h]);
  out << '\n';
  out << "floored";
  for (int h : c.floored) out << ' ' << h;
  out << '\n';
  if (c.method == CalibrationMethod::bootstrap) {
    out << "replicates " << c.replicates << '\n';
    out << "seed " << c.seed << '\n';
    out << "q_value " << format_double(c.q_value) << '\n';
    out << "psd_repair " << (c.psd_repair_applied ? 1 : 0) << '\n';
    out << "min_eigen_clipped "
        << (c.min_eigen_clipped ? format_double(*c.min_eigen_clipped) : std::string("none"))
        << '\n';
    out << "rho_digest " << c.rho_digest << '\n';
  }
}

inline CalibrationFile read_calibration(std::istream& in) {
  CalibrationFile c;
  std::string line;
  if (!std::getline(in, line) || line.rfind("seqmon-calibration v1", 0) != 0)
    throw ParseError("not a seqmon-calibration v1 file");
  std::vector<double> sigma2, mean;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "method") {
      std::string v; ss >> v;
      if (v == "gumbel") c.method = CalibrationMethod::gumbel;
      else if (v == "bootstrap") c.method = CalibrationMethod::bootstrap;
      else throw ParseError("bad method '" + v + "'");
    } else if (key == "m") ss >> c.m;
    else if (key == "d") ss >> c.d;
    else if (key == "T") ss >> c.T;
    else if (key == "alpha") ss >> c.alpha;
    else if (key == "lrv") {
      std::string v; ss >> v;
      if (v == "qs") c.lrv = LrvMethod::quadratic_spectral;
      else if (v == "standard") c.lrv = LrvMethod::standard_truncated;
      else throw ParseError("bad lrv method '" + v + "'");
    } else if (key == "bandwidth") ss >> c.bandwidth;
    else if (key == "floor_fraction") ss >> c.floor_fraction;
    else if (key == "threshold") ss >> c.threshold;
    else if (key == "sigma2") {
      double v;
      while (ss >> v) sigma2.push_back(v);
    } else if (key == "stable_mean") {
      double v;
      while (ss >> v) mean.push_back(v);
    } else if (key == "floored") {
      int v;
      while (ss >> v) c.floored.push_back(v);
    } else if (key == "replicates") ss >> c.replicates;
    else if (key == "seed") ss >> c.seed;
    else if (key == "q_value") ss >> c.q_value;
    else if (key == "psd_repair") {
      int v = 0; ss >> v;
      c.psd_repair_applied = v != 0;
    } else if (key == "min_eigen_clipped") {
      std::string v; ss >> v;
      if (v != "none") c.min_eigen_clipped = std::strtod(v.c_str(), nullptr);
    } else if (key == "rho_digest") ss >> c.rho_digest;
    // unknown keys are ignored for forward compatibility
  }
  if (static_cast<Eigen::Index>(sigma2.size()) != c.d ||
      static_cast<Eigen::Index>(mean.size()) != c.d || c.d < 1)
    throw ParseError("calibration file has inconsistent dimensions");
  c.sigma2 = Eigen::Map<const Array>(sigma2.data(), c.d);
  c.stable_mean = Eigen::Map<const Array>(mean.data(), c.d);
  return c;
}

inline CalibrationFile read_calibration_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_calibration(in);
}

}  // namespace seqmon

#endif  // SEQMON_IO_HPP

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "psdcert/core.hpp"
#include "psdcert/criterion.hpp"
#include "psdcert/moments.hpp"
#include "psdcert/reconstruct.hpp"

namespace psdcert {
namespace io {

/// FNV-1a 64-bit over raw bytes; the content digest printed by commands.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string digest_hex(const std::string& bytes) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << fnv1a64(bytes);
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',' || c == '\t' || c == ';') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

inline double parse_double(const std::string& s, const std::string& what, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse " + what +
                             " from '" + s + "'");
  }
}

inline std::int64_t parse_int(const std::string& s, const std::string& what, int line_no) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse " + what +
                             " from '" + s + "'");
  }
}

/// Full-precision decimal round trip for doubles.
inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// pulse records and histograms: `beta_rad,n` / `beta_rad,n,count`

inline std::string format_records(const std::vector<PulseRecord>& records) {
  std::ostringstream os;
  os << "beta_rad,n\n";
  for (const PulseRecord& r : records) os << detail::fmt(r.beta) << "," << r.n << "\n";
  return os.str();
}

/// Reads a record file or a histogram file; histogram rows expand to that
/// many identical records.  The header line names the schema.
inline std::vector<PulseRecord> parse_records(const std::string& content,
                                              const std::string& origin = "input") {
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  bool histogram = false;
  bool saw_header = false;
  std::vector<PulseRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!saw_header) {
      const std::vector<std::string> head = detail::split_fields(t);
      if (head.size() >= 2 && head[0] == "beta_rad" && head[1] == "n") {
        histogram = head.size() >= 3 && head[2] == "count";
        saw_header = true;
        continue;
      }
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": expected header 'beta_rad,n' or 'beta_rad,n,count'");
    }
    const std::vector<std::string> f = detail::split_fields(t);
    if (f.size() != (histogram ? 3u : 2u))
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": wrong field count");
    PulseRecord r;
    r.beta = detail::parse_double(f[0], "beta_rad", line_no);
    r.n = detail::parse_int(f[1], "n", line_no);
    if (r.n < 0)
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": negative photon count");
    if (histogram) {
      const std::int64_t count = detail::parse_int(f[2], "count", line_no);
      if (count < 0)
        throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                                 ": negative row count");
      for (std::int64_t i = 0; i < count; ++i) records.push_back(r);
    } else {
      records.push_back(r);
    }
  }
  if (!saw_header) throw std::runtime_error(origin + ": empty file, header required");
  return records;
}

inline std::string format_angle_histograms(const std::vector<AngleHistogram>& hists) {
  std::ostringstream os;
  os << "beta_rad,n,count\n";
  for (const AngleHistogram& h : hists)
    for (const auto& [n, count] : h.counts)
      os << detail::fmt(h.beta) << "," << n << "," << count << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// key=value metadata sidecars

inline std::string format_meta(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

inline std::map<std::string, std::string> parse_meta(const std::string& content) {
  std::map<std::string, std::string> out;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) continue;
    out[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  return out;
}

inline std::string meta_path_for(const std::string& path) { return path + ".meta"; }

// ---------------------------------------------------------------------------
// marginal distribution: two columns M_sq, density + sidecar

inline std::string format_marginal(const MarginalDistribution& marginal) {
  std::ostringstream os;
  os << "M_sq,density\n";
  for (std::size_t i = 0; i < marginal.grid.size(); ++i)
    os << detail::fmt(marginal.grid[i]) << "," << detail::fmt(marginal.density[i]) << "\n";
  return os.str();
}

inline MarginalDistribution parse_marginal(const std::string& content,
                                           const std::string& origin = "input") {
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  std::vector<double> grid, density;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::vector<std::string> f = detail::split_fields(t);
    if (!saw_header) {
      if (f.size() >= 2 && f[0] == "M_sq" && f[1] == "density") {
        saw_header = true;
        continue;
      }
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": expected header 'M_sq,density'");
    }
    if (f.size() != 2)
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": wrong field count");
    grid.push_back(detail::parse_double(f[0], "M_sq", line_no));
    density.push_back(detail::parse_double(f[1], "density", line_no));
  }
  if (!saw_header) throw std::runtime_error(origin + ": empty file, header required");
  return MarginalDistribution::from_density(std::move(grid), std::move(density));
}

inline void write_marginal_with_meta(const std::string& path, const MarginalDistribution& marginal,
                                     const DetectionParams& params,
                                     const DeconvolutionSettings& settings) {
  write_file(path, format_marginal(marginal));
  write_file(meta_path_for(path),
             format_meta({{"schema", "marginal"},
                          {"grid_points", std::to_string(marginal.grid.size())},
                          {"grid_max", detail::fmt(marginal.grid.back())},
                          {"lambda", detail::fmt(params.lambda())},
                          {"regularization", detail::fmt(settings.regularization)},
                          {"frequency_cutoff", detail::fmt(settings.frequency_cutoff)},
                          {"normalization", detail::fmt(marginal.normalization)}}));
}

// ---------------------------------------------------------------------------
// moments: ordered `k,value` + route sidecar

template <class Moments>
std::string format_moments(const Moments& m) {
  std::ostringstream os;
  os << "k,value\n";
  for (int k = 1; k <= m.k_max; ++k)
    os << k << "," << detail::fmt(m.values[static_cast<std::size_t>(k - 1)]) << "\n";
  return os.str();
}

inline std::vector<double> parse_moment_values(const std::string& content,
                                               const std::string& origin = "input") {
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::vector<std::string> f = detail::split_fields(t);
    if (!saw_header) {
      if (f.size() >= 2 && f[0] == "k" && f[1] == "value") {
        saw_header = true;
        continue;
      }
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": expected header 'k,value'");
    }
    if (f.size() != 2)
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": wrong field count");
    const std::int64_t k = detail::parse_int(f[0], "k", line_no);
    if (k != static_cast<std::int64_t>(values.size()) + 1)
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": moment orders must run 1,2,3,... without gaps");
    values.push_back(detail::parse_double(f[1], "value", line_no));
  }
  if (values.empty()) throw std::runtime_error(origin + ": no moment rows");
  return values;
}

// ---------------------------------------------------------------------------
// sweep: rows `N_c,f_mean,std,condition` + summary block

inline std::string format_sweep(const SweepResult& sweep) {
  std::ostringstream os;
  os << "N_c,f_mean,std,condition\n";
  for (const SweepEntry& e : sweep.entries)
    os << e.n_cutoff << "," << detail::fmt(e.f_mean) << "," << detail::fmt(e.bootstrap_std) << ","
       << detail::fmt(e.condition) << "\n";
  os << "# summary\n";
  os << "plateau = " << detail::fmt(sweep.plateau) << "\n";
  os << "plateau_std = " << detail::fmt(sweep.plateau_std) << "\n";
  os << "verdict = " << to_string(sweep.verdict) << "\n";
  os << "z = " << detail::fmt(sweep.z) << "\n";
  os << "route = " << sweep.route << "\n";
  os << "seed = " << sweep.seed << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// append-only report directories: base/run-NNNN

inline std::string next_report_dir(const std::string& base) {
  namespace fs = std::filesystem;
  fs::create_directories(base);
  int next = 0;
  for (const auto& entry : fs::directory_iterator(base)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("run-", 0) == 0) {
      try {
        next = std::max(next, std::stoi(name.substr(4)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
  std::ostringstream os;
  os << "run-" << std::setfill('0') << std::setw(4) << next;
  const fs::path dir = fs::path(base) / os.str();
  fs::create_directory(dir);
  return dir.string();
}

}  // namespace io
}  // namespace psdcert

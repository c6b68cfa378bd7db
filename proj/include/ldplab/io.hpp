#ifndef LDPLAB_IO_HPP
#define LDPLAB_IO_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldplab/ldp_verify.hpp"
#include "ldplab/paths.hpp"

namespace ldplab {

/// Shortest text that round-trips a double; fixed across runs and platforms
/// that share the C library. Infinities print as -inf / inf.
inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real_field(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("csv: bad number '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string ldp_report_csv(const LDPReport& report) {
  std::string s = "epsilon,estimate,stderr,eps_log_estimate,threshold,pass,zero_hit,cp_upper\n";
  for (const auto& r : report.rows) {
    s += format_real(r.epsilon) + ',' + format_real(r.estimate) + ',' + format_real(r.std_error) + ',' +
         format_real(r.eps_log_estimate) + ',' + format_real(r.threshold) + ',' + (r.pass ? "1" : "0") + ',' +
         (r.zero_hit ? "1" : "0") + ',' + format_real(r.upper_confidence) + '\n';
  }
  return s;
}

inline std::string tail_report_csv(const std::vector<TailRow>& rows) {
  std::string s = "test,epsilon,delta,estimate,stderr,bound,pass\n";
  for (const auto& r : rows) {
    s += r.test + ',' + format_real(r.epsilon) + ',' + format_real(r.delta) + ',' + format_real(r.estimate) + ',' +
         format_real(r.std_error) + ',' + format_real(r.bound) + ',' + (r.pass ? "1" : "0") + '\n';
  }
  return s;
}

/// Header t,x_1..x_d and one row per grid node.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::string s = "t";
  for (std::size_t k = 0; k < traj.dim(); ++k) s += ",x_" + std::to_string(k + 1);
  s += '\n';
  for (std::size_t j = 0; j <= traj.steps(); ++j) {
    s += format_real(traj.grid.node(j));
    for (std::size_t k = 0; k < traj.dim(); ++k) s += ',' + format_real(traj.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
    s += '\n';
  }
  return s;
}

/// Reads a trajectory CSV; the t column must be the uniform grid of its length.
inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "t") throw std::runtime_error(path.string() + ": header must be t,x_1,...,x_d");
  const std::size_t d = header.size() - 1;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != d + 1) throw std::runtime_error(path.string() + ": row width differs from header");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_real_field(c));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw std::runtime_error(path.string() + ": need at least two nodes");
  const TimeGrid grid(rows.size() - 1);
  Trajectory traj(grid, d);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (std::abs(rows[j][0] - grid.node(j)) > 1e-9) throw std::runtime_error(path.string() + ": t column is not a uniform grid on [0,1]");
    for (std::size_t k = 0; k < d; ++k) traj.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[j][k + 1];
  }
  return traj;
}

/// Number of rows and passing rows of a report CSV with a `pass` column.
struct PassCount {
  std::size_t rows = 0;
  std::size_t passed = 0;
};

inline PassCount count_passes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(line);
  std::size_t col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "pass") col = i;
  }
  if (col == header.size()) throw std::runtime_error(path.string() + ": no pass column");
  PassCount pc;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() <= col) throw std::runtime_error(path.string() + ": short row");
    ++pc.rows;
    if (cells[col] == "1") ++pc.passed;
  }
  return pc;
}

}  // namespace ldplab

#endif  // LDPLAB_IO_HPP

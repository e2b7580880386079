#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "commrl/core.hpp"

namespace commrl {

/// One per-episode record of training progress and communication cost.
struct MetricsRow {
  long episode = 0;
  double reward = 0.0;
  std::optional<double> potential;
  std::optional<double> gap_estimate;
  std::uint64_t comm_rounds = 0;
  std::uint64_t samples = 0;
};

inline constexpr const char* kMetricsCsvHeader =
    "episode,reward,potential,gap_estimate,comm_rounds,samples";

/// Formats a double with 12 significant digits, enough to make reruns byte-identical while
/// keeping files readable.
inline std::string format_sig12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

inline std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = kMetricsCsvHeader;
  out.push_back('\n');
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.episode);
    out.push_back(',');
    out += format_sig12(r.reward);
    out.push_back(',');
    if (r.potential.has_value()) out += format_sig12(*r.potential);
    out.push_back(',');
    if (r.gap_estimate.has_value()) out += format_sig12(*r.gap_estimate);
    out.push_back(',');
    out += std::to_string(r.comm_rounds);
    out.push_back(',');
    out += std::to_string(r.samples);
    out.push_back('\n');
  }
  return out;
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  require_state(f.good(), "cannot open metrics file for writing: " + path);
  const std::string body = format_metrics_csv(rows);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  require_state(f.good(), "failed writing metrics file: " + path);
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}
}  // namespace detail

/// Parses CSV text produced by format_metrics_csv, validating the schema. Used by tests and
/// by tooling that post-processes runs.
inline std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require_arg(static_cast<bool>(std::getline(in, line)), "metrics CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require_arg(line == kMetricsCsvHeader, "metrics CSV header mismatch: " + line);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    require_arg(cells.size() == 6, "metrics CSV row must have 6 cells: " + line);
    MetricsRow r;
    r.episode = std::stol(cells[0]);
    r.reward = std::stod(cells[1]);
    if (!cells[2].empty()) r.potential = std::stod(cells[2]);
    if (!cells[3].empty()) r.gap_estimate = std::stod(cells[3]);
    r.comm_rounds = static_cast<std::uint64_t>(std::stoull(cells[4]));
    r.samples = static_cast<std::uint64_t>(std::stoull(cells[5]));
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Mean of a metric over the last `window` rows (or all rows if fewer).
inline double tail_mean_reward(const std::vector<MetricsRow>& rows, std::size_t window) {
  require_arg(!rows.empty(), "tail_mean_reward needs at least one row");
  const std::size_t k = window == 0 || window > rows.size() ? rows.size() : window;
  double sum = 0.0;
  for (std::size_t i = rows.size() - k; i < rows.size(); ++i) sum += rows[i].reward;
  return sum / static_cast<double>(k);
}

}  // namespace commrl

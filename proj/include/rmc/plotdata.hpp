#pragma once

// Figure-ready extracts from a training metrics file: work-pieces delivered
// per kind and the per-episode reward sums, each smoothed with a trailing
// moving average.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmc/trainer.hpp"

namespace rmc {

class MetricsFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricsSeries {
  std::vector<long> episode;
  std::vector<double> delivered_wp1, delivered_wp2;
  std::vector<double> sum_combined, sum_r_int, sum_r_ext;

  std::size_t size() const { return episode.size(); }
};

/// Parses the CSV written by the trainer. Rows must carry every header
/// column with numeric values; errors name the 1-based file row.
inline MetricsSeries parse_metrics(std::istream& is) {
  MetricsSeries s;
  std::string line;
  if (!std::getline(is, line)) return s;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != MetricsRow::kHeader) throw MetricsFormatError("row 1: unexpected header");
  std::vector<std::string> names;
  {
    std::istringstream hs(line);
    std::string name;
    while (std::getline(hs, name, ',')) names.push_back(name);
  }
  auto col = [&](const char* n) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return i;
    throw std::logic_error("metrics header lacks column");
  };
  const std::size_t c_ep = col("episode"), c_d1 = col("delivered_wp1"), c_d2 = col("delivered_wp2"),
                    c_comb = col("sum_combined"), c_int = col("sum_r_int"), c_ext = col("sum_r_ext");
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> vals;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end == cell.c_str() || *end != '\0')
        throw MetricsFormatError("row " + std::to_string(row) + ": non-numeric value '" + cell + "'");
      vals.push_back(v);
    }
    if (vals.size() != names.size())
      throw MetricsFormatError("row " + std::to_string(row) + ": expected " + std::to_string(names.size()) +
                               " columns, got " + std::to_string(vals.size()));
    s.episode.push_back(static_cast<long>(vals[c_ep]));
    s.delivered_wp1.push_back(vals[c_d1]);
    s.delivered_wp2.push_back(vals[c_d2]);
    s.sum_combined.push_back(vals[c_comb]);
    s.sum_r_int.push_back(vals[c_int]);
    s.sum_r_ext.push_back(vals[c_ext]);
  }
  return s;
}

inline MetricsSeries read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file '" + path + "'");
  return parse_metrics(in);
}

/// Trailing mean over the last `window` values; the first entries average
/// over what is available so far.
inline std::vector<double> moving_average(const std::vector<double>& xs, int window) {
  if (window < 1) throw std::invalid_argument("moving average window must be >= 1");
  std::vector<double> out(xs.size());
  double sum = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    if (i >= static_cast<std::size_t>(window)) sum -= xs[i - static_cast<std::size_t>(window)];
    const std::size_t n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

namespace detail {
inline std::string plot_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace detail

/// "episode,wp1,wp2" with smoothed delivered counts.
inline std::string parts_output_csv(const MetricsSeries& s, int window) {
  const auto a = moving_average(s.delivered_wp1, window);
  const auto b = moving_average(s.delivered_wp2, window);
  std::string out = "episode,wp1,wp2\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += std::to_string(s.episode[i]) + "," + detail::plot_number(a[i]) + "," + detail::plot_number(b[i]) + "\n";
  return out;
}

/// "episode,combined,intrinsic,extrinsic" with smoothed reward sums.
inline std::string combined_reward_csv(const MetricsSeries& s, int window) {
  const auto c = moving_average(s.sum_combined, window);
  const auto i_ = moving_average(s.sum_r_int, window);
  const auto e = moving_average(s.sum_r_ext, window);
  std::string out = "episode,combined,intrinsic,extrinsic\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += std::to_string(s.episode[i]) + "," + detail::plot_number(c[i]) + "," + detail::plot_number(i_[i]) + "," +
           detail::plot_number(e[i]) + "\n";
  return out;
}

}  // namespace rmc

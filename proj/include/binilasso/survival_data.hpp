#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "binilasso/errors.hpp"

namespace binilasso {

/// Right-censored outcome: observed times and event indicators
/// (1 = event observed, 0 = censored).
struct Outcome {
  std::vector<double> time;
  std::vector<std::uint8_t> event;

  int n() const { return static_cast<int>(time.size()); }
  int n_events() const {
    int c = 0;
    for (auto e : event) c += e;
    return c;
  }
};

/// Predictor matrix with a right-censored survival outcome.
/// Immutable after construction; safe to share across threads.
struct SurvivalDataset {
  Eigen::MatrixXd features;  // n x p
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<std::string> feature_names;

  int n() const { return static_cast<int>(times.size()); }
  int p() const { return static_cast<int>(features.cols()); }

  Outcome outcome() const { return Outcome{times, events}; }
};

struct StandardizationParams {
  std::vector<double> means;
  std::vector<double> sds;  // sample sd, n-1 denominator; strictly positive
};

struct ValidationReport {
  int n = 0;
  int p = 0;
  int n_events = 0;
  double event_rate = 0.0;
  std::vector<int> distinct_counts;            // per feature
  std::vector<std::vector<int>> tie_groups;    // rows sharing an event time (groups of size >= 2)
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, value);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(value);
}

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Linear-interpolation sample quantile on an ascending-sorted vector.
inline double sample_quantile_sorted(const std::vector<double>& sorted, double prob) {
  const double h = (sorted.size() - 1) * prob;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

/// Throws if the dataset violates its invariants (positive finite times,
/// at least one event, n >= 2).
inline void check_dataset(const SurvivalDataset& ds) {
  if (ds.n() < 2) throw InvalidConfig("dataset needs at least 2 observations");
  if (static_cast<int>(ds.events.size()) != ds.n() || ds.features.rows() != ds.n())
    throw DimensionMismatch("times/events/features row counts disagree");
  for (int i = 0; i < ds.n(); ++i) {
    if (!(ds.times[i] > 0.0) || !std::isfinite(ds.times[i])) throw NonPositiveTime(i + 1);
    if (ds.events[i] > 1) throw InvalidEventCode(i + 1, ds.events[i]);
  }
  if (std::find(ds.events.begin(), ds.events.end(), std::uint8_t(1)) == ds.events.end())
    throw NoEvents();
}

/// Loads a comma-separated file with a header row. All columns other than
/// time_col and event_col become features, in file order. Strict numeric
/// parsing: decimal point, no thousands separators, no missing cells.
inline SurvivalDataset load_csv(const std::string& path, const std::string& time_col,
                                const std::string& event_col) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error("empty file: " + path);
  const auto header = detail::split_csv_line(line);

  int time_idx = -1, event_idx = -1;
  std::vector<int> feature_cols;
  std::vector<std::string> feature_names;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[c] == time_col) {
      time_idx = c;
    } else if (header[c] == event_col) {
      event_idx = c;
    } else {
      feature_cols.push_back(c);
      feature_names.push_back(header[c]);
    }
  }
  if (time_idx < 0) throw MissingColumn(time_col);
  if (event_idx < 0) throw MissingColumn(event_col);

  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<std::vector<double>> cols(feature_cols.size());

  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw NonNumericCell(row, static_cast<int>(cells.size()), "(wrong field count)");
    double t;
    if (!detail::parse_double(cells[time_idx], t)) throw NonNumericCell(row, time_idx + 1, cells[time_idx]);
    if (!(t > 0.0)) throw NonPositiveTime(row);
    double e;
    if (!detail::parse_double(cells[event_idx], e)) throw NonNumericCell(row, event_idx + 1, cells[event_idx]);
    if (e != 0.0 && e != 1.0) throw InvalidEventCode(row, e);
    times.push_back(t);
    events.push_back(static_cast<std::uint8_t>(e));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      double v;
      if (!detail::parse_double(cells[feature_cols[k]], v))
        throw NonNumericCell(row, feature_cols[k] + 1, cells[feature_cols[k]]);
      cols[k].push_back(v);
    }
  }

  SurvivalDataset ds;
  ds.times = std::move(times);
  ds.events = std::move(events);
  ds.feature_names = std::move(feature_names);
  ds.features.resize(ds.n(), static_cast<int>(cols.size()));
  for (int j = 0; j < static_cast<int>(cols.size()); ++j)
    for (int i = 0; i < ds.n(); ++i) ds.features(i, j) = cols[j][i];
  check_dataset(ds);
  return ds;
}

inline void write_csv(const SurvivalDataset& ds, const std::string& path,
                      const std::string& time_col = "time", const std::string& event_col = "event") {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << time_col << ',' << event_col;
  for (const auto& name : ds.feature_names) out << ',' << name;
  out << '\n';
  for (int i = 0; i < ds.n(); ++i) {
    out << detail::format_full(ds.times[i]) << ',' << int(ds.events[i]);
    for (int j = 0; j < ds.p(); ++j) out << ',' << detail::format_full(ds.features(i, j));
    out << '\n';
  }
}

/// Centers and scales each feature to sample mean 0 and sample sd 1
/// (n-1 denominator). Outcome columns are untouched.
inline std::pair<SurvivalDataset, StandardizationParams> standardize(const SurvivalDataset& ds) {
  const int n = ds.n(), p = ds.p();
  if (n < 2) throw InvalidConfig("standardize needs n >= 2");
  StandardizationParams params;
  params.means.resize(p);
  params.sds.resize(p);
  SurvivalDataset out = ds;
  for (int j = 0; j < p; ++j) {
    const double mean = ds.features.col(j).mean();
    const double ssd = (ds.features.col(j).array() - mean).square().sum();
    if (!(ssd > 0.0)) throw ConstantFeature(j);
    const double sd = std::sqrt(ssd / (n - 1));
    params.means[j] = mean;
    params.sds[j] = sd;
    out.features.col(j) = (ds.features.col(j).array() - mean) / sd;
  }
  return {std::move(out), std::move(params)};
}

inline SurvivalDataset unstandardize(const SurvivalDataset& ds, const StandardizationParams& params) {
  SurvivalDataset out = ds;
  for (int j = 0; j < ds.p(); ++j)
    out.features.col(j) = ds.features.col(j).array() * params.sds[j] + params.means[j];
  return out;
}

/// Report-only inspection: distinct values per feature, event count, and
/// tie structure among event times.
inline ValidationReport validate(const SurvivalDataset& ds) {
  ValidationReport rep;
  rep.n = ds.n();
  rep.p = ds.p();
  for (auto e : ds.events) rep.n_events += e;
  rep.event_rate = rep.n > 0 ? static_cast<double>(rep.n_events) / rep.n : 0.0;
  rep.distinct_counts.resize(rep.p);
  for (int j = 0; j < rep.p; ++j) {
    std::set<double> vals;
    for (int i = 0; i < rep.n; ++i) vals.insert(ds.features(i, j));
    rep.distinct_counts[j] = static_cast<int>(vals.size());
  }
  std::map<double, std::vector<int>> by_time;
  for (int i = 0; i < rep.n; ++i)
    if (ds.events[i]) by_time[ds.times[i]].push_back(i);
  for (auto& [t, rows] : by_time)
    if (rows.size() >= 2) rep.tie_groups.push_back(rows);
  return rep;
}

}  // namespace binilasso

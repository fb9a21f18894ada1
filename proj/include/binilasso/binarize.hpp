#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "binilasso/design.hpp"
#include "binilasso/errors.hpp"
#include "binilasso/survival_data.hpp"

namespace binilasso {

enum class GridStrategy { quantile, uniform, explicit_thresholds };

inline std::string to_string(GridStrategy s) {
  switch (s) {
    case GridStrategy::quantile: return "quantile";
    case GridStrategy::uniform: return "uniform";
    case GridStrategy::explicit_thresholds: return "explicit";
  }
  return "?";
}

/// Candidate cut-points per feature. Thresholds are strictly increasing and
/// lie strictly inside the observed range; a feature with fewer than two
/// distinct values is dropped (empty list + a warning entry).
struct CutGrid {
  std::vector<std::vector<double>> thresholds;
  GridStrategy strategy = GridStrategy::quantile;
  std::vector<int> dropped_features;  // degenerate, excluded from the design

  int n_features() const { return static_cast<int>(thresholds.size()); }
  int total_thresholds() const {
    int d = 0;
    for (const auto& t : thresholds) d += static_cast<int>(t.size());
    return d;
  }
};

namespace detail {

/// Snaps a raw quantile to the midpoint of the pair of adjacent distinct
/// values bracketing it. The indicator x > threshold only changes where the
/// threshold crosses an observed value, so the midpoint is the canonical
/// representative of the cut; it also keeps cuts strictly inside the range
/// when the quantile itself lands on the min or max (heavily tied features).
inline double snap_to_midpoint(const std::vector<double>& distinct, double q) {
  auto it = std::upper_bound(distinct.begin(), distinct.end(), q);
  std::size_t t = (it == distinct.begin()) ? 0 : (it - distinct.begin()) - 1;
  if (t + 1 >= distinct.size()) t = distinct.size() - 2;
  return 0.5 * (distinct[t] + distinct[t + 1]);
}

}  // namespace detail

/// Builds per-feature candidate thresholds. Quantile grids place candidates
/// at the k/bins sample quantiles (k = 1 .. bins-1), snapped to midpoints of
/// adjacent distinct values and deduplicated, so d_j <= bins - 1 and every
/// inter-threshold cell is occupied.
inline CutGrid build_cut_grid(const SurvivalDataset& ds, int bins_per_feature,
                              GridStrategy strategy = GridStrategy::quantile,
                              const std::vector<std::vector<double>>* explicit_cuts = nullptr) {
  if (strategy != GridStrategy::explicit_thresholds && bins_per_feature < 2)
    throw InvalidConfig("bins_per_feature must be >= 2");
  if (strategy == GridStrategy::explicit_thresholds && explicit_cuts == nullptr)
    throw InvalidConfig("explicit strategy requires thresholds");

  CutGrid grid;
  grid.strategy = strategy;
  grid.thresholds.resize(ds.p());

  for (int j = 0; j < ds.p(); ++j) {
    std::vector<double> sorted(ds.features.col(j).data(), ds.features.col(j).data() + ds.n());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) {
      grid.dropped_features.push_back(j);
      continue;
    }
    const double lo = distinct.front(), hi = distinct.back();

    std::vector<double> cuts;
    switch (strategy) {
      case GridStrategy::quantile:
        for (int k = 1; k < bins_per_feature; ++k) {
          const double q = detail::sample_quantile_sorted(sorted, double(k) / bins_per_feature);
          cuts.push_back(detail::snap_to_midpoint(distinct, q));
        }
        break;
      case GridStrategy::uniform:
        for (int k = 1; k < bins_per_feature; ++k)
          cuts.push_back(lo + (hi - lo) * double(k) / bins_per_feature);
        break;
      case GridStrategy::explicit_thresholds: {
        if (static_cast<int>(explicit_cuts->size()) != ds.p())
          throw InvalidConfig("explicit thresholds must cover every feature");
        cuts = (*explicit_cuts)[j];
        for (std::size_t k = 1; k < cuts.size(); ++k)
          if (!(cuts[k] > cuts[k - 1]))
            throw InvalidConfig("explicit thresholds must be strictly increasing");
        break;
      }
    }

    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::erase_if(cuts, [&](double c) { return !(c > lo) || !(c < hi); });
    if (cuts.empty()) {
      grid.dropped_features.push_back(j);
      continue;
    }
    grid.thresholds[j] = std::move(cuts);
  }
  return grid;
}

/// Column metadata: which feature and threshold a design column encodes.
/// threshold_index -1 marks an unpenalized boundary indicator anchored at the
/// observed feature minimum.
struct ColumnMeta {
  int feature = 0;
  int threshold_index = 0;
  double threshold = 0.0;
};

/// Cumulative binarized design: column for (j, l) is the indicator
/// 1{x_j > mu_{j,l}} (left-open interval). Columns are feature-major with
/// thresholds ascending, so within a feature block columns are nested and
/// elementwise nonincreasing.
struct CumulativeDesign {
  ColumnSet matrix;
  std::vector<ColumnMeta> column_meta;
  std::vector<int> penalty_exempt;  // boundary indicator columns, if enabled
  std::vector<std::string> feature_names;

  int d() const { return matrix.cols(); }
  int n() const { return matrix.n_rows; }
};

inline CumulativeDesign cumulative_binarize(const SurvivalDataset& ds, const CutGrid& grid,
                                            bool include_boundary = false) {
  if (grid.n_features() != ds.p())
    throw GridMismatch("grid covers " + std::to_string(grid.n_features()) + " features, dataset has " +
                       std::to_string(ds.p()));
  CumulativeDesign design;
  design.matrix.n_rows = ds.n();
  design.feature_names = ds.feature_names;

  for (int j = 0; j < ds.p(); ++j) {
    if (grid.thresholds[j].empty()) continue;
    const double lo = ds.features.col(j).minCoeff();
    const double hi = ds.features.col(j).maxCoeff();
    for (double cut : grid.thresholds[j])
      if (!(cut > lo) || !(cut < hi))
        throw GridMismatch("threshold " + std::to_string(cut) + " outside the open range of feature " +
                           std::to_string(j));

    if (include_boundary) {
      SparseColumn col;
      for (int i = 0; i < ds.n(); ++i)
        if (ds.features(i, j) > lo) col.rows.push_back(i);
      design.penalty_exempt.push_back(static_cast<int>(design.column_meta.size()));
      design.column_meta.push_back({j, -1, lo});
      design.matrix.columns.push_back(std::move(col));
    }
    for (int l = 0; l < static_cast<int>(grid.thresholds[j].size()); ++l) {
      const double cut = grid.thresholds[j][l];
      SparseColumn col;
      for (int i = 0; i < ds.n(); ++i)
        if (ds.features(i, j) > cut) col.rows.push_back(i);
      design.column_meta.push_back({j, l, cut});
      design.matrix.columns.push_back(std::move(col));
    }
  }
  return design;
}

struct RankReport {
  int n_columns = 0;
  int numerical_rank = 0;
  bool full_rank = false;
  std::vector<std::vector<int>> duplicate_column_groups;
};

/// Numerical column rank (singular values above 1e-10 relative to the
/// largest) plus exact duplicate-column detection. Diagnostic only; densifies
/// the design, so intended for moderate sizes.
inline RankReport design_rank_check(const CumulativeDesign& design) {
  RankReport rep;
  rep.n_columns = design.d();
  if (design.d() == 0) return rep;

  Eigen::MatrixXd dense = design.matrix.to_dense();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * sv(0);
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rep.numerical_rank;
  rep.full_rank = rep.numerical_rank == design.d();

  std::map<std::vector<std::int32_t>, std::vector<int>> by_pattern;
  for (int j = 0; j < design.d(); ++j) by_pattern[design.matrix.columns[j].rows].push_back(j);
  for (auto& [rows, cols] : by_pattern)
    if (cols.size() >= 2) rep.duplicate_column_groups.push_back(cols);
  return rep;
}

/// Grid interchange format: {feature_name: [thresholds...]}.
inline nlohmann::json grid_to_json(const CutGrid& grid, const std::vector<std::string>& names) {
  nlohmann::json out = nlohmann::json::object();
  for (int j = 0; j < grid.n_features(); ++j)
    if (!grid.thresholds[j].empty()) out[names[j]] = grid.thresholds[j];
  return out;
}

inline CutGrid grid_from_json(const nlohmann::json& j, const std::vector<std::string>& names) {
  CutGrid grid;
  grid.strategy = GridStrategy::explicit_thresholds;
  grid.thresholds.resize(names.size());
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (!j.contains(names[f])) {
      grid.dropped_features.push_back(static_cast<int>(f));
      continue;
    }
    grid.thresholds[f] = j.at(names[f]).get<std::vector<double>>();
    for (std::size_t k = 1; k < grid.thresholds[f].size(); ++k)
      if (!(grid.thresholds[f][k] > grid.thresholds[f][k - 1]))
        throw InvalidConfig("imported thresholds must be strictly increasing");
  }
  return grid;
}

}  // namespace binilasso

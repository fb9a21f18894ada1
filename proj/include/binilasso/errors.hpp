#pragma once

#include <stdexcept>
#include <string>

namespace binilasso {

/// Base class for all library errors. Structured subclasses carry the
/// offending indices so callers can report precise diagnostics.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& name)
      : Error("missing column: " + name), column(name) {}
  std::string column;
};

class NonNumericCell : public Error {
 public:
  NonNumericCell(int row, int col, const std::string& cell)
      : Error("non-numeric cell at data row " + std::to_string(row) + ", column " +
              std::to_string(col) + ": '" + cell + "'"),
        row(row),
        col(col) {}
  int row;  // 1-based data row (header excluded)
  int col;  // 1-based column
};

class NonPositiveTime : public Error {
 public:
  explicit NonPositiveTime(int row)
      : Error("non-positive or non-finite time at data row " + std::to_string(row)), row(row) {}
  int row;
};

class InvalidEventCode : public Error {
 public:
  InvalidEventCode(int row, double value)
      : Error("event code at data row " + std::to_string(row) + " is " + std::to_string(value) +
              "; must be exactly 0 or 1"),
        row(row),
        value(value) {}
  int row;
  double value;
};

class ConstantFeature : public Error {
 public:
  explicit ConstantFeature(int feature)
      : Error("feature " + std::to_string(feature) + " has zero sample variance"),
        feature(feature) {}
  int feature;
};

class GridMismatch : public Error {
 public:
  explicit GridMismatch(const std::string& what) : Error("grid mismatch: " + what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};

class NoEvents : public Error {
 public:
  NoEvents() : Error("outcome contains no events") {}
};

class AllWeightsZero : public Error {
 public:
  AllWeightsZero() : Error("penalty weights are all zero") {}
};

class FoldWithoutEvents : public Error {
 public:
  explicit FoldWithoutEvents(int fold)
      : Error("cross-validation fold " + std::to_string(fold) + " contains no events"),
        fold(fold) {}
  int fold;
};

class PenalizedFitRejected : public Error {
 public:
  explicit PenalizedFitRejected(double lambda)
      : Error("operation requires an unpenalized fit, got lambda = " + std::to_string(lambda)),
        lambda(lambda) {}
  double lambda;
};

class NoComparablePairs : public Error {
 public:
  NoComparablePairs() : Error("no comparable pairs for concordance") {}
};

class SingularRefit : public Error {
 public:
  explicit SingularRefit(const std::string& detail) : Error("singular refit design: " + detail) {}
};

class EmptyReport : public Error {
 public:
  EmptyReport() : Error("cut-point report is empty") {}
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& what) : Error("invalid config: " + what) {}
};

}  // namespace binilasso

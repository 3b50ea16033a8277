#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace isurv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a statistic has no information (zero variance, no events).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

struct SurvivalOutcome {
  double time = 0.0;  // days
  bool event = false; // true = death observed
};

using Outcomes = std::vector<SurvivalOutcome>;

// Throws unless every time is finite and non-negative.
void validate_outcomes(std::span<const SurvivalOutcome> outcomes);
std::size_t count_events(std::span<const SurvivalOutcome> outcomes);

/// Column-major table of named numeric features, rows aligned with outcomes.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(std::size_t rows) : rows_(rows) {}

  void add_column(std::string name, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws naming the column when it is absent.
  std::size_t index_of(std::string_view name) const;

  std::span<const double> column(std::size_t j) const { return columns_.at(j); }
  std::span<const double> column(std::string_view name) const {
    return columns_[index_of(name)];
  }
  std::vector<double>& mutable_column(std::size_t j) { return columns_.at(j); }

  double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }
  std::vector<double> row(std::size_t r) const;

  FeatureTable select_rows(std::span<const std::size_t> rows) const;
  FeatureTable select_columns(std::span<const std::string> names) const;

 private:
  std::size_t rows_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

template <typename T>
std::vector<T> gather(std::span<const T> values, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(values[i]);
  return out;
}

}  // namespace isurv

#include "isurv/common.hpp"

#include <cmath>

namespace isurv {

void validate_outcomes(std::span<const SurvivalOutcome> outcomes) {
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double t = outcomes[i].time;
    if (!std::isfinite(t) || t < 0.0)
      throw Error("invalid survival time at row " + std::to_string(i) + ": must be finite and >= 0");
  }
}

std::size_t count_events(std::span<const SurvivalOutcome> outcomes) {
  std::size_t n = 0;
  for (const auto& o : outcomes) n += o.event ? 1 : 0;
  return n;
}

void FeatureTable::add_column(std::string name, std::vector<double> values) {
  if (names_.empty() && columns_.empty() && rows_ == 0) rows_ = values.size();
  if (values.size() != rows_)
    throw Error("column '" + name + "' has " + std::to_string(values.size()) + " rows, expected " +
                std::to_string(rows_));
  if (find(name)) throw Error("duplicate column '" + name + "'");
  names_.push_back(std::move(name));
  columns_.push_back(std::move(values));
}

std::optional<std::size_t> FeatureTable::find(std::string_view name) const {
  for (std::size_t j = 0; j < names_.size(); ++j)
    if (names_[j] == name) return j;
  return std::nullopt;
}

std::size_t FeatureTable::index_of(std::string_view name) const {
  if (auto j = find(name)) return *j;
  throw Error("missing feature column '" + std::string(name) + "'");
}

std::vector<double> FeatureTable::row(std::size_t r) const {
  std::vector<double> out(cols());
  for (std::size_t j = 0; j < cols(); ++j) out[j] = columns_[j][r];
  return out;
}

FeatureTable FeatureTable::select_rows(std::span<const std::size_t> rows) const {
  FeatureTable out(rows.size());
  for (std::size_t j = 0; j < cols(); ++j)
    out.add_column(names_[j], gather<double>(columns_[j], rows));
  return out;
}

FeatureTable FeatureTable::select_columns(std::span<const std::string> names) const {
  FeatureTable out(rows_);
  for (const auto& n : names) out.add_column(n, columns_[index_of(n)]);
  return out;
}

}  // namespace isurv

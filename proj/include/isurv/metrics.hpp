#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "isurv/common.hpp"

namespace isurv::metrics {

inline constexpr double kTwoYearsDays = 730.0;

/// Harrell pair counts in half-units so parallel reduction is exact.
struct ConcordanceCounts {
  std::uint64_t concordant_halves = 0;  // 2 per concordant pair, 1 per risk tie
  std::uint64_t comparable = 0;

  double index() const;
};

ConcordanceCounts concordance_counts(std::span<const double> risks,
                                     std::span<const SurvivalOutcome> outcomes);

double concordance_index(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes);

// Mann-Whitney AUROC with half credit for score ties; positive[i] != 0 marks class 1.
double auroc(std::span<const double> scores, std::span<const int> positive);

// Cumulative/dynamic AUROC at the horizon; early-censored subjects excluded.
double auc_at_horizon(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes,
                      double horizon = kTwoYearsDays);

struct MetricResult {
  double point = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t n_bootstrap = 0;   // resamples requested
  std::size_t n_degenerate = 0;  // resamples where the metric was undefined
  double level = 0.95;
  std::uint64_t seed = 0;
};

using MetricFn =
    std::function<double(std::span<const double>, std::span<const SurvivalOutcome>)>;

// Linear interpolation of the empirical CDF: the q-quantile of m sorted values
// sits at 1-based position m*q, so q = 0.025 with m = 1000 is order statistic 25.
double percentile_sorted(std::span<const double> sorted, double q);

// Percentile bootstrap. Resample b draws from its own stream (seed, b).
MetricResult bootstrap_ci(const MetricFn& metric, std::span<const double> risks,
                          std::span<const SurvivalOutcome> outcomes, std::size_t n = 1000,
                          double level = 0.95, std::uint64_t seed = 0);

// Indices drawn for resample b; shared by the serial and parallel paths.
std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::size_t b);

namespace serial {
ConcordanceCounts concordance_counts(std::span<const double> risks,
                                     std::span<const SurvivalOutcome> outcomes);
MetricResult bootstrap_ci(const MetricFn& metric, std::span<const double> risks,
                          std::span<const SurvivalOutcome> outcomes, std::size_t n = 1000,
                          double level = 0.95, std::uint64_t seed = 0);
}  // namespace serial

}  // namespace isurv::metrics

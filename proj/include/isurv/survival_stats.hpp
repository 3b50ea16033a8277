#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "isurv/common.hpp"

namespace isurv::stats {

/// Product-limit survival curve. One entry per distinct event time.
struct KmCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<double> variance;  // Greenwood
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  std::vector<std::size_t> n_at_risk;
  std::vector<std::size_t> n_events;

  std::size_t steps() const { return times.size(); }
  // Right-continuous step function; 1.0 before the first event.
  double survival_at(double t) const;
  // First event time with survival <= 0.5, if the curve gets there.
  std::optional<double> median() const;
};

struct LogRankResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 1;
};

enum class PairMode { all, consecutive };

struct PairwiseLogRank {
  std::size_t n_groups = 0;
  PairMode mode = PairMode::all;
  double alpha = 0.05;
  double corrected_alpha = 0.05;
  std::size_t n_tests = 0;
  bool all_distinct = false;
  // Row-major n_groups x n_groups; diagonal and untested pairs hold NaN.
  std::vector<double> statistic;
  std::vector<double> p_value;

  double p(std::size_t i, std::size_t j) const { return p_value[i * n_groups + j]; }
};

inline constexpr double kZ95 = 1.959963984540054;

// Upper tail of chi-square(dof) at x.
double chi2_sf(double x, double dof);
// Two-sided standard-normal p-value for z.
double normal_two_sided_p(double z);

KmCurve kaplan_meier(std::span<const SurvivalOutcome> outcomes);

LogRankResult logrank_two_sample(std::span<const SurvivalOutcome> a,
                                 std::span<const SurvivalOutcome> b);

PairwiseLogRank pairwise_logrank(const std::vector<Outcomes>& groups, double alpha,
                                 PairMode mode = PairMode::all);

// Splits outcomes by 1-based label into n_groups lists.
std::vector<Outcomes> split_by_label(std::span<const SurvivalOutcome> outcomes,
                                     std::span<const int> labels, std::size_t n_groups);

}  // namespace isurv::stats

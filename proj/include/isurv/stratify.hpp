#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isurv/common.hpp"
#include "isurv/cox.hpp"
#include "isurv/metrics.hpp"
#include "isurv/survival_stats.hpp"

namespace isurv::stratify {

// Labels 1..n (1 = lowest risk). Stable sort, contiguous bins, earlier bins
// take the remainder.
std::vector<int> quantile_stratify(std::span<const double> risks, std::size_t n);

// Highest risk in each of bins 1..n-1; used to carry train bins to new rows.
std::vector<double> cut_points(std::span<const double> risks, std::span<const int> labels,
                               std::size_t n);
std::vector<int> apply_cut_points(std::span<const double> risks, std::span<const double> cuts);

struct GroupingOptions {
  double alpha = 0.05;
  stats::PairMode mode = stats::PairMode::all;
  bool with_metrics = true;
  std::size_t n_bootstrap = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  double horizon = metrics::kTwoYearsDays;
};

struct CandidateSummary {
  std::size_t n_groups = 0;
  bool all_distinct = false;
  bool degenerate = false;
  bool tied_boundary = false;  // tied risks leave a quantile group empty
  double max_p = 1.0;
};

struct StratificationResult {
  std::size_t n_groups = 1;
  bool significant = false;  // false: no tested count separated every pair
  std::vector<int> labels;
  std::vector<std::size_t> group_sizes;
  std::vector<stats::KmCurve> km_per_group;
  std::optional<stats::PairwiseLogRank> pairwise;
  double corrected_alpha = 0.0;
  bool all_distinct = false;
  std::vector<double> cut_points;
  std::vector<CandidateSummary> candidates;
  std::optional<metrics::MetricResult> group_cindex;
  std::optional<metrics::MetricResult> group_auc;
};

// KM curves, pairwise log-rank and group-index metrics for a fixed labelling.
StratificationResult describe_grouping(std::span<const int> labels, std::size_t n_groups,
                                       std::span<const SurvivalOutcome> outcomes,
                                       const GroupingOptions& options = {});

StratificationResult select_group_count(std::span<const double> risks,
                                        std::span<const SurvivalOutcome> outcomes,
                                        const GroupingOptions& options = {},
                                        std::size_t n_max = 6);

// One group per stage code present, ordered by code.
std::vector<int> tnm_stratify(std::span<const double> stage, std::span<const int> declared_codes);

// --- survival tree -------------------------------------------------------

struct TreeConfig {
  std::size_t min_leaf = 30;
  std::size_t max_leaves = 6;
  double split_alpha = 0.05;
};

struct SplitCandidate {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;  // left: x <= threshold
  double statistic = 0.0;
  double p_value = 1.0;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t n = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  int group = 0;  // leaves only
};

struct SurvivalTree {
  std::vector<std::string> feature_names;
  std::vector<TreeNode> nodes;
  std::size_t n_leaves = 0;
  std::vector<int> labels;  // training rows

  int assign(std::span<const double> x) const;
  std::vector<int> assign(const FeatureTable& features) const;
  std::string render(int digits = 3) const;
};

SplitCandidate best_split(const FeatureTable& features, std::span<const SurvivalOutcome> outcomes,
                          std::span<const std::size_t> rows, const TreeConfig& config);

namespace serial {
SplitCandidate best_split(const FeatureTable& features, std::span<const SurvivalOutcome> outcomes,
                          std::span<const std::size_t> rows, const TreeConfig& config);
}  // namespace serial

SurvivalTree fit_survival_tree(const FeatureTable& features,
                               std::span<const SurvivalOutcome> outcomes,
                               const TreeConfig& config = {});

// --- linear SVM boundaries -----------------------------------------------

struct SvmOptions {
  double c = 1.0;
  std::size_t max_iterations = 100000;  // epochs of dual coordinate descent
  double tolerance = 1e-3;              // projected-gradient spread
  std::uint64_t seed = 0;
};

/// Soft-margin linear SVM in standardized feature space (bias as an
/// augmented constant feature).
struct LinearSvm {
  cox::NormParams norm;
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// y[i] in {-1, +1}.
LinearSvm train_linear_svm(const FeatureTable& features, std::span<const int> y,
                           const SvmOptions& options = {});

struct BoundaryHyperplane {
  std::size_t boundary_index = 0;  // separates groups <= k from > k
  std::vector<std::string> feature_names;
  std::vector<double> weights;  // raw feature units
  double intercept = 0.0;
  double test_auroc = 0.0;
  std::vector<double> std_weights;
  double std_intercept = 0.0;

  double decision(std::span<const double> x) const;
  bool high_side(std::span<const double> x) const { return decision(x) > 0.0; }
};

BoundaryHyperplane fit_boundary_svm(const FeatureTable& train, std::span<const int> train_labels,
                                    std::size_t k, const FeatureTable& test,
                                    std::span<const int> test_labels,
                                    const SvmOptions& options = {});

struct DecisionList {
  std::vector<BoundaryHyperplane> boundaries;  // k = 1..n-1

  std::size_t n_groups() const { return boundaries.size() + 1; }
  std::string render(int digits = 3) const;
};

DecisionList assemble_decision_list(std::vector<BoundaryHyperplane> boundaries);
// First boundary whose hyperplane puts x on the low side; n if none.
int assign_group(const DecisionList& list, std::span<const double> x);
std::vector<int> assign_groups(const DecisionList& list, const FeatureTable& features);

}  // namespace isurv::stratify

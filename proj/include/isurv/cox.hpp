#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "isurv/common.hpp"

namespace isurv::cox {

enum class Normalization { zscore, minmax, none };
enum class Ties { efron, breslow };

struct NormParam {
  std::string name;
  double center = 0.0;
  double scale = 1.0;
};

/// Per-column affine transform (x - center) / scale learned on training rows.
struct NormParams {
  Normalization mode = Normalization::zscore;
  std::vector<NormParam> params;

  FeatureTable apply(const FeatureTable& raw) const;
};

// zscore uses the sample standard deviation (divisor n-1); minmax maps to [0,1].
std::pair<FeatureTable, NormParams> standardize(const FeatureTable& features,
                                                Normalization mode = Normalization::zscore);

/// Negative log partial likelihood with its gradient and Hessian in beta.
struct PartialLikelihood {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

Eigen::MatrixXd design_matrix(const FeatureTable& features);

PartialLikelihood evaluate_partial_likelihood(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                                              std::span<const SurvivalOutcome> outcomes,
                                              Ties ties = Ties::efron);

double neg_log_partial_likelihood(std::span<const double> beta, const FeatureTable& features,
                                  std::span<const SurvivalOutcome> outcomes,
                                  Ties ties = Ties::efron);

// Mean squared off-diagonal Pearson correlation between columns.
double orthogonality_penalty(const FeatureTable& features);

struct CoxLossConfig {
  double lambda = 0.001;
};

double composite_loss(std::span<const double> beta, const FeatureTable& features,
                      std::span<const SurvivalOutcome> outcomes, const CoxLossConfig& config = {});

struct FitOptions {
  Normalization normalization = Normalization::zscore;
  Ties ties = Ties::efron;
  int max_iterations = 100;
  double tolerance = 1e-7;  // relative change of the log partial likelihood
  int max_halvings = 10;
  // Smallest admissible eigenvalue ratio of the information matrix.
  double collinearity_ratio = 1e-10;
};

enum class Effect { protective, harmful, neutral };
const char* to_string(Effect e);

struct CoxFit {
  std::vector<std::string> feature_names;
  std::vector<double> beta;
  std::vector<double> std_err;
  std::vector<double> hazard_ratio;
  std::vector<double> hr_ci_lower;
  std::vector<double> hr_ci_upper;
  std::vector<double> p_value;
  double log_likelihood = 0.0;  // final negative log partial likelihood
  NormParams norm_params;
  FitOptions options;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return beta.size(); }
  Effect effect(std::size_t i) const;
};

CoxFit fit_cox(const FeatureTable& features, std::span<const SurvivalOutcome> outcomes,
               const FitOptions& options = {});

// One pass: drop features with p > alpha and refit on the survivors.
CoxFit prune_refit(const CoxFit& fit, const FeatureTable& features,
                   std::span<const SurvivalOutcome> outcomes, double alpha = 0.05);

// Linear predictor on the log-relative-hazard scale.
std::vector<double> predict_risk(const CoxFit& fit, const FeatureTable& features);

}  // namespace isurv::cox

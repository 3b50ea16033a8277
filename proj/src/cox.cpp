#include "isurv/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isurv/survival_stats.hpp"

namespace isurv::cox {

namespace {

void require_finite(std::span<const double> v, const std::string& what) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error("non-finite value in " + what);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

FeatureTable NormParams::apply(const FeatureTable& raw) const {
  FeatureTable out(raw.rows());
  for (const auto& p : params) {
    auto col = raw.column(p.name);
    std::vector<double> v(col.begin(), col.end());
    for (auto& x : v) x = (x - p.center) / p.scale;
    out.add_column(p.name, std::move(v));
  }
  return out;
}

std::pair<FeatureTable, NormParams> standardize(const FeatureTable& features, Normalization mode) {
  NormParams np;
  np.mode = mode;
  for (std::size_t j = 0; j < features.cols(); ++j) {
    const auto& name = features.names()[j];
    auto col = features.column(j);
    require_finite(col, "column '" + name + "'");
    NormParam p{name, 0.0, 1.0};
    if (mode == Normalization::zscore) {
      if (col.size() < 2) throw Error("zero variance in column '" + name + "'");
      p.center = mean_of(col);
      p.scale = sample_sd(col, p.center);
    } else if (mode == Normalization::minmax) {
      auto [lo, hi] = std::minmax_element(col.begin(), col.end());
      p.center = col.empty() ? 0.0 : *lo;
      p.scale = col.empty() ? 0.0 : *hi - *lo;
    }
    if (mode != Normalization::none && !(p.scale > 0.0))
      throw Error("zero variance in column '" + name + "'");
    np.params.push_back(std::move(p));
  }
  return {np.apply(features), np};
}

Eigen::MatrixXd design_matrix(const FeatureTable& features) {
  Eigen::MatrixXd x(features.rows(), features.cols());
  for (std::size_t j = 0; j < features.cols(); ++j) {
    auto col = features.column(j);
    for (std::size_t i = 0; i < features.rows(); ++i) x(i, j) = col[i];
  }
  return x;
}

PartialLikelihood evaluate_partial_likelihood(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                                              std::span<const SurvivalOutcome> outcomes,
                                              Ties ties) {
  const auto n = static_cast<Eigen::Index>(outcomes.size());
  const auto p = x.cols();
  if (x.rows() != n) throw Error("feature rows do not match outcomes");
  if (beta.size() != p) throw Error("beta length does not match feature count");
  validate_outcomes(outcomes);
  if (count_events(outcomes) == 0) throw DegenerateError("no observed events");
  if (!beta.allFinite() || !x.allFinite()) throw Error("non-finite inputs to partial likelihood");

  const Eigen::VectorXd eta = x * beta;
  const double shift = n > 0 ? eta.maxCoeff() : 0.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return outcomes[static_cast<std::size_t>(a)].time > outcomes[static_cast<std::size_t>(b)].time;
  });

  PartialLikelihood out;
  out.gradient = Eigen::VectorXd::Zero(p);
  out.hessian = Eigen::MatrixXd::Zero(p, p);

  // Risk-set sums, accumulated from the latest time backwards.
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  std::size_t pos = 0;
  while (pos < order.size()) {
    const double t = outcomes[static_cast<std::size_t>(order[pos])].time;
    double d0 = 0.0;
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p, p);
    int tied_events = 0;
    for (; pos < order.size() && outcomes[static_cast<std::size_t>(order[pos])].time == t; ++pos) {
      const Eigen::Index i = order[pos];
      const double w = std::exp(eta(i) - shift);
      const auto xi = x.row(i).transpose();
      s0 += w;
      s1.noalias() += w * xi;
      s2.noalias() += w * xi * xi.transpose();
      if (outcomes[static_cast<std::size_t>(i)].event) {
        ++tied_events;
        d0 += w;
        d1.noalias() += w * xi;
        d2.noalias() += w * xi * xi.transpose();
        out.value -= eta(i);
        out.gradient -= xi;
      }
    }
    for (int l = 0; l < tied_events; ++l) {
      const double f = ties == Ties::efron ? static_cast<double>(l) / tied_events : 0.0;
      const double phi = s0 - f * d0;
      const Eigen::VectorXd z1 = s1 - f * d1;
      out.value += std::log(phi) + shift;
      out.gradient += z1 / phi;
      out.hessian += (s2 - f * d2) / phi - (z1 * z1.transpose()) / (phi * phi);
    }
  }
  return out;
}

double neg_log_partial_likelihood(std::span<const double> beta, const FeatureTable& features,
                                  std::span<const SurvivalOutcome> outcomes, Ties ties) {
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  return evaluate_partial_likelihood(b, design_matrix(features), outcomes, ties).value;
}

double orthogonality_penalty(const FeatureTable& features) {
  const std::size_t p = features.cols();
  if (p == 0) throw Error("orthogonality penalty needs at least one column");
  if (features.rows() < 2) throw Error("orthogonality penalty needs at least two rows");
  std::vector<std::vector<double>> centered(p);
  std::vector<double> norm(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto col = features.column(j);
    require_finite(col, "column '" + features.names()[j] + "'");
    const double m = mean_of(col);
    centered[j].reserve(col.size());
    double ss = 0.0;
    for (double v : col) {
      centered[j].push_back(v - m);
      ss += (v - m) * (v - m);
    }
    if (!(ss > 0.0)) throw Error("zero variance in column '" + features.names()[j] + "'");
    norm[j] = std::sqrt(ss);
  }
  if (p == 1) return 0.0;
  double total = 0.0;
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < features.rows(); ++i) dot += centered[a][i] * centered[b][i];
      const double r = dot / (norm[a] * norm[b]);
      total += 2.0 * r * r;
    }
  return total / static_cast<double>(p * (p - 1));
}

double composite_loss(std::span<const double> beta, const FeatureTable& features,
                      std::span<const SurvivalOutcome> outcomes, const CoxLossConfig& config) {
  if (!(config.lambda >= 0.0)) throw Error("lambda must be non-negative");
  const double cox = neg_log_partial_likelihood(beta, features, outcomes);
  if (config.lambda == 0.0) return cox;
  return cox + config.lambda * orthogonality_penalty(features);
}

const char* to_string(Effect e) {
  switch (e) {
    case Effect::protective: return "protective";
    case Effect::harmful: return "harmful";
    case Effect::neutral: return "neutral";
  }
  return "neutral";
}

Effect CoxFit::effect(std::size_t i) const {
  if (hazard_ratio.at(i) < 1.0) return Effect::protective;
  if (hazard_ratio[i] > 1.0) return Effect::harmful;
  return Effect::neutral;
}

namespace {

void check_information(const Eigen::MatrixXd& info, double ratio) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double hi = ev.maxCoeff();
  const double lo = ev.minCoeff();
  if (!(hi > 0.0) || !(lo > ratio * hi)) throw Error("collinear features");
}

}  // namespace

CoxFit fit_cox(const FeatureTable& features, std::span<const SurvivalOutcome> outcomes,
               const FitOptions& options) {
  if (features.cols() == 0) throw Error("no features to fit");
  if (features.rows() != outcomes.size()) throw Error("feature rows do not match outcomes");
  validate_outcomes(outcomes);
  if (count_events(outcomes) == 0) throw DegenerateError("no observed events");

  auto [scaled, norm] = standardize(features, options.normalization);
  const Eigen::MatrixXd x = design_matrix(scaled);
  const auto p = x.cols();

  CoxFit fit;
  fit.feature_names = features.names();
  fit.norm_params = norm;
  fit.options = options;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  PartialLikelihood cur = evaluate_partial_likelihood(beta, x, outcomes, options.ties);
  for (int it = 1; it <= options.max_iterations; ++it) {
    check_information(cur.hessian, options.collinearity_ratio);
    Eigen::VectorXd step = cur.hessian.ldlt().solve(cur.gradient);
    if (!step.allFinite()) throw Error("collinear features");

    Eigen::VectorXd cand_beta = beta - step;
    PartialLikelihood cand = evaluate_partial_likelihood(cand_beta, x, outcomes, options.ties);
    for (int h = 0; h < options.max_halvings && !(cand.value <= cur.value); ++h) {
      step *= 0.5;
      cand_beta = beta - step;
      cand = evaluate_partial_likelihood(cand_beta, x, outcomes, options.ties);
    }
    const double rel = std::fabs(cur.value - cand.value) / std::max(std::fabs(cur.value), 1e-300);
    beta = cand_beta;
    cur = std::move(cand);
    fit.iterations = it;
    if (rel < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    fit.warnings.push_back("Newton-Raphson did not converge in " +
                           std::to_string(options.max_iterations) + " iterations");

  check_information(cur.hessian, options.collinearity_ratio);
  const Eigen::MatrixXd cov = cur.hessian.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.log_likelihood = cur.value;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double b = beta(j);
    const double se = std::sqrt(std::max(cov(j, j), 0.0));
    fit.beta.push_back(b);
    fit.std_err.push_back(se);
    fit.hazard_ratio.push_back(std::exp(b));
    fit.hr_ci_lower.push_back(std::exp(b - 1.96 * se));
    fit.hr_ci_upper.push_back(std::exp(b + 1.96 * se));
    fit.p_value.push_back(se > 0.0 ? stats::normal_two_sided_p(b / se) : 1.0);
    // A flat likelihood in this direction: the estimate runs off to infinity.
    if (se > 100.0 * std::max(1.0, std::fabs(b)))
      fit.warnings.push_back("coefficient of '" + fit.feature_names[static_cast<std::size_t>(j)] +
                             "' diverges (monotone likelihood)");
  }
  return fit;
}

CoxFit prune_refit(const CoxFit& fit, const FeatureTable& features,
                   std::span<const SurvivalOutcome> outcomes, double alpha) {
  std::vector<std::string> keep;
  for (std::size_t j = 0; j < fit.size(); ++j)
    if (!(fit.p_value[j] > alpha)) keep.push_back(fit.feature_names[j]);
  if (keep.size() == fit.size()) return fit;
  if (keep.empty()) throw Error("no significant features");
  return fit_cox(features.select_columns(keep), outcomes, fit.options);
}

std::vector<double> predict_risk(const CoxFit& fit, const FeatureTable& features) {
  std::vector<std::span<const double>> cols;
  for (const auto& name : fit.feature_names) cols.push_back(features.column(name));
  std::vector<double> risk(features.rows(), 0.0);
  for (std::size_t j = 0; j < fit.size(); ++j) {
    const auto& np = fit.norm_params.params[j];
    for (std::size_t i = 0; i < risk.size(); ++i)
      risk[i] += fit.beta[j] * ((cols[j][i] - np.center) / np.scale);
  }
  return risk;
}

}  // namespace isurv::cox

#include "isurv/stratify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "isurv/random.hpp"

namespace isurv::stratify {

std::vector<int> quantile_stratify(std::span<const double> risks, std::size_t n) {
  if (n < 2) throw Error("at least 2 groups are required");
  if (n > risks.size()) throw Error("more groups than subjects");
  std::vector<std::size_t> order(risks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return risks[a] < risks[b]; });
  const std::size_t base = risks.size() / n, extra = risks.size() % n;
  std::vector<int> labels(risks.size());
  std::size_t pos = 0;
  for (std::size_t g = 0; g < n; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) labels[order[pos++]] = static_cast<int>(g + 1);
  }
  return labels;
}

std::vector<double> cut_points(std::span<const double> risks, std::span<const int> labels,
                               std::size_t n) {
  std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < risks.size(); ++i) {
    auto g = static_cast<std::size_t>(labels[i] - 1);
    hi[g] = std::max(hi[g], risks[i]);
  }
  hi.pop_back();
  return hi;
}

std::vector<int> apply_cut_points(std::span<const double> risks, std::span<const double> cuts) {
  std::vector<int> labels(risks.size());
  for (std::size_t i = 0; i < risks.size(); ++i) {
    int g = 1;
    for (double c : cuts) g += risks[i] > c ? 1 : 0;
    labels[i] = g;
  }
  return labels;
}

StratificationResult describe_grouping(std::span<const int> labels, std::size_t n_groups,
                                       std::span<const SurvivalOutcome> outcomes,
                                       const GroupingOptions& options) {
  StratificationResult res;
  res.n_groups = n_groups;
  res.labels.assign(labels.begin(), labels.end());
  auto groups = stats::split_by_label(outcomes, labels, n_groups);
  for (const auto& g : groups) {
    res.group_sizes.push_back(g.size());
    res.km_per_group.push_back(g.empty() ? stats::KmCurve{} : stats::kaplan_meier(g));
  }
  const bool all_nonempty =
      std::all_of(groups.begin(), groups.end(), [](const Outcomes& g) { return !g.empty(); });
  if (n_groups >= 2 && all_nonempty) {
    try {
      res.pairwise = stats::pairwise_logrank(groups, options.alpha, options.mode);
      res.corrected_alpha = res.pairwise->corrected_alpha;
      res.all_distinct = res.pairwise->all_distinct;
    } catch (const DegenerateError&) {
      res.all_distinct = false;
    }
  }
  if (options.with_metrics) {
    std::vector<double> score(labels.begin(), labels.end());
    try {
      res.group_cindex = metrics::bootstrap_ci(
          [](std::span<const double> r, std::span<const SurvivalOutcome> o) {
            return metrics::concordance_index(r, o);
          },
          score, outcomes, options.n_bootstrap, options.level, options.seed);
    } catch (const Error&) {
    }
    try {
      const double h = options.horizon;
      res.group_auc = metrics::bootstrap_ci(
          [h](std::span<const double> r, std::span<const SurvivalOutcome> o) {
            return metrics::auc_at_horizon(r, o, h);
          },
          score, outcomes, options.n_bootstrap, options.level, stream_seed(options.seed, {1}));
    } catch (const Error&) {
    }
  }
  return res;
}

namespace {

// Quantile labels with each boundary that lands inside a run of equal risks
// moved to the nearer end of the run, so cut points reproduce the labels.
// Empty when two boundaries meet and a group vanishes.
std::optional<std::vector<int>> tie_consistent_labels(std::span<const double> risks, std::size_t n) {
  const auto quantile = quantile_stratify(risks, n);
  const std::size_t m = risks.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return risks[a] < risks[b]; });
  std::vector<std::size_t> bounds;  // elements below each boundary, in sorted order
  std::size_t below = 0;
  for (std::size_t g = 1; g < n; ++g) {
    below += static_cast<std::size_t>(std::count(quantile.begin(), quantile.end(), static_cast<int>(g)));
    std::size_t pos = below;
    const double v = risks[order[pos]];
    if (risks[order[pos - 1]] == v) {
      std::size_t lo = pos, hi = pos;
      while (lo > 0 && risks[order[lo - 1]] == v) --lo;
      while (hi < m && risks[order[hi]] == v) ++hi;
      pos = pos - lo <= hi - pos ? lo : hi;
    }
    if (pos == 0 || pos == m || (!bounds.empty() && pos <= bounds.back())) return std::nullopt;
    bounds.push_back(pos);
  }
  std::vector<int> labels(m);
  std::size_t g = 0;
  for (std::size_t k = 0; k < m; ++k) {
    while (g < bounds.size() && k >= bounds[g]) ++g;
    labels[order[k]] = static_cast<int>(g + 1);
  }
  return labels;
}

}  // namespace

StratificationResult select_group_count(std::span<const double> risks,
                                        std::span<const SurvivalOutcome> outcomes,
                                        const GroupingOptions& options, std::size_t n_max) {
  if (risks.size() != outcomes.size()) throw Error("risks and outcomes differ in length");
  validate_outcomes(outcomes);
  if (count_events(outcomes) < 2) throw DegenerateError("degenerate outcomes: fewer than 2 events");
  n_max = std::min(n_max, risks.size());

  std::vector<CandidateSummary> candidates;
  for (std::size_t n = 2; n <= n_max; ++n) candidates.push_back({n, false, false, false, 1.0});
  std::vector<std::exception_ptr> failures(candidates.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(candidates.size()); ++c) {
    auto& cand = candidates[static_cast<std::size_t>(c)];
    try {
      const auto labels = tie_consistent_labels(risks, cand.n_groups);
      if (!labels) {
        cand.tied_boundary = true;
        continue;
      }
      const auto groups = stats::split_by_label(outcomes, *labels, cand.n_groups);
      const auto rep = stats::pairwise_logrank(groups, options.alpha, options.mode);
      cand.all_distinct = rep.all_distinct;
      double mx = 0.0;
      for (double p : rep.p_value)
        if (!std::isnan(p)) mx = std::max(mx, p);
      cand.max_p = mx;
    } catch (const DegenerateError&) {
      cand.degenerate = true;
    } catch (...) {
      failures[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  std::size_t chosen = 1;
  for (const auto& c : candidates)
    if (c.all_distinct) chosen = std::max(chosen, c.n_groups);

  StratificationResult res;
  if (chosen >= 2) {
    const auto labels = *tie_consistent_labels(risks, chosen);
    res = describe_grouping(labels, chosen, outcomes, options);
    res.significant = true;
    res.cut_points = cut_points(risks, labels, chosen);
  } else {
    const std::vector<int> labels(risks.size(), 1);
    res = describe_grouping(labels, 1, outcomes, options);
    res.significant = false;
  }
  res.candidates = std::move(candidates);
  return res;
}

std::vector<int> tnm_stratify(std::span<const double> stage, std::span<const int> declared_codes) {
  const std::set<int> declared(declared_codes.begin(), declared_codes.end());
  std::set<int> present;
  for (double s : stage) {
    const double r = std::round(s);
    if (r != s || !declared.count(static_cast<int>(r)))
      throw Error("unseen stage code " + std::to_string(s));
    present.insert(static_cast<int>(r));
  }
  std::vector<int> labels(stage.size());
  for (std::size_t i = 0; i < stage.size(); ++i) {
    const int code = static_cast<int>(std::round(stage[i]));
    labels[i] = static_cast<int>(std::distance(present.begin(), present.find(code))) + 1;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Survival tree

namespace {

// Log-rank chi-square for left-vs-right membership over rows in time order.
// Built from integer counts per distinct time, so it does not depend on the
// order of subjects sharing a time.
double split_statistic(std::span<const std::size_t> by_time, std::span<const SurvivalOutcome> outcomes,
                       std::span<const char> left, double n_left) {
  double n1 = n_left;
  double n2 = static_cast<double>(by_time.size()) - n_left;
  double u = 0.0, v = 0.0;
  std::size_t i = 0;
  while (i < by_time.size()) {
    const double t = outcomes[by_time[i]].time;
    double d1 = 0, d2 = 0, c1 = 0, c2 = 0;
    for (; i < by_time.size() && outcomes[by_time[i]].time == t; ++i) {
      const std::size_t r = by_time[i];
      const bool l = left[r] != 0;
      if (outcomes[r].event)
        (l ? d1 : d2) += 1;
      else
        (l ? c1 : c2) += 1;
    }
    const double d = d1 + d2, n = n1 + n2;
    if (d > 0) {
      u += (d1 * n2 - d2 * n1) / n;
      if (n > 1) v += d * (n1 * n2) * (n - d) / (n * n * (n - 1));
    }
    n1 -= d1 + c1;
    n2 -= d2 + c2;
  }
  return v > 0.0 ? u * u / v : 0.0;
}

SplitCandidate scan_feature(const FeatureTable& features, std::span<const SurvivalOutcome> outcomes,
                            std::span<const std::size_t> rows, std::span<const std::size_t> by_time,
                            std::size_t feature, const TreeConfig& config) {
  auto col = features.column(feature);
  std::vector<std::size_t> by_value(rows.begin(), rows.end());
  std::sort(by_value.begin(), by_value.end(), [&](std::size_t a, std::size_t b) {
    return col[a] < col[b] || (col[a] == col[b] && a < b);
  });
  std::vector<char> left(features.rows(), 0);
  SplitCandidate best;
  best.feature = feature;
  const std::size_t n = by_value.size();
  for (std::size_t pos = 0; pos + 1 < n; ++pos) {
    left[by_value[pos]] = 1;
    const double here = col[by_value[pos]], next = col[by_value[pos + 1]];
    if (here == next) continue;
    const std::size_t nl = pos + 1;
    if (nl < config.min_leaf || n - nl < config.min_leaf) continue;
    const double stat = split_statistic(by_time, outcomes, left, static_cast<double>(nl));
    if (!best.found || stat > best.statistic) {
      best.found = true;
      best.statistic = stat;
      best.threshold = 0.5 * (here + next);
    }
  }
  if (best.found) best.p_value = stats::chi2_sf(best.statistic, 1.0);
  return best;
}

std::vector<std::size_t> rows_by_time(std::span<const SurvivalOutcome> outcomes,
                                      std::span<const std::size_t> rows) {
  std::vector<std::size_t> by_time(rows.begin(), rows.end());
  std::sort(by_time.begin(), by_time.end(), [&](std::size_t a, std::size_t b) {
    return outcomes[a].time < outcomes[b].time || (outcomes[a].time == outcomes[b].time && a < b);
  });
  return by_time;
}

// Larger statistic wins; ties go to the lower feature index, then lower threshold.
bool better(const SplitCandidate& a, const SplitCandidate& b) {
  if (!a.found) return false;
  if (!b.found) return true;
  if (a.statistic != b.statistic) return a.statistic > b.statistic;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

SplitCandidate admissible(SplitCandidate c, const TreeConfig& config) {
  if (c.found && !(c.p_value <= config.split_alpha)) c.found = false;
  return c;
}

}  // namespace

namespace serial {

SplitCandidate best_split(const FeatureTable& features, std::span<const SurvivalOutcome> outcomes,
                          std::span<const std::size_t> rows, const TreeConfig& config) {
  const auto by_time = rows_by_time(outcomes, rows);
  SplitCandidate best;
  for (std::size_t f = 0; f < features.cols(); ++f) {
    auto c = scan_feature(features, outcomes, rows, by_time, f, config);
    if (better(c, best)) best = c;
  }
  return admissible(best, config);
}

}  // namespace serial

SplitCandidate best_split(const FeatureTable& features, std::span<const SurvivalOutcome> outcomes,
                          std::span<const std::size_t> rows, const TreeConfig& config) {
  const auto by_time = rows_by_time(outcomes, rows);
  std::vector<SplitCandidate> per_feature(features.cols());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t f = 0; f < static_cast<std::int64_t>(features.cols()); ++f)
    per_feature[static_cast<std::size_t>(f)] =
        scan_feature(features, outcomes, rows, by_time, static_cast<std::size_t>(f), config);
  SplitCandidate best;
  for (const auto& c : per_feature)
    if (better(c, best)) best = c;
  return admissible(best, config);
}

int SurvivalTree::assign(std::span<const double> x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& nd = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(node)].group;
}

std::vector<int> SurvivalTree::assign(const FeatureTable& features) const {
  const auto table = features.select_columns(feature_names);
  std::vector<int> out(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) out[i] = assign(table.row(i));
  return out;
}

std::string SurvivalTree::render(int digits) const {
  std::ostringstream os;
  auto rec = [&](auto&& self, int id, int indent) -> void {
    const auto& nd = nodes[static_cast<std::size_t>(id)];
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (nd.feature < 0) {
      os << pad << "-> R" << nd.group << " (n=" << nd.n << ")\n";
      return;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, nd.threshold);
    os << pad << "if " << feature_names[static_cast<std::size_t>(nd.feature)] << " <= " << buf << ":\n";
    self(self, nd.left, indent + 1);
    os << pad << "else:\n";
    self(self, nd.right, indent + 1);
  };
  rec(rec, 0, 0);
  return os.str();
}

SurvivalTree fit_survival_tree(const FeatureTable& features,
                               std::span<const SurvivalOutcome> outcomes, const TreeConfig& config) {
  if (features.rows() != outcomes.size()) throw Error("feature rows do not match outcomes");
  if (config.min_leaf < 1 || config.max_leaves < 1) throw Error("invalid survival tree config");
  if (outcomes.size() < 2 * config.min_leaf) throw Error("too few subjects for the survival tree");
  validate_outcomes(outcomes);

  SurvivalTree tree;
  tree.feature_names = features.names();
  std::vector<std::vector<std::size_t>> node_rows;
  std::vector<SplitCandidate> pending;  // best admissible split per node

  auto add_leaf = [&](std::vector<std::size_t> rows) {
    TreeNode nd;
    nd.n = rows.size();
    tree.nodes.push_back(nd);
    pending.push_back(rows.size() >= 2 * config.min_leaf ? best_split(features, outcomes, rows, config)
                                                         : SplitCandidate{});
    node_rows.push_back(std::move(rows));
  };
  std::vector<std::size_t> all(outcomes.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  add_leaf(std::move(all));

  std::size_t leaves = 1;
  while (leaves < config.max_leaves) {
    int pick = -1;
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      if (tree.nodes[id].feature >= 0 || !pending[id].found) continue;
      if (pick < 0 || pending[id].statistic > pending[static_cast<std::size_t>(pick)].statistic)
        pick = static_cast<int>(id);
    }
    if (pick < 0) break;
    const auto id = static_cast<std::size_t>(pick);
    const SplitCandidate split = pending[id];
    auto col = features.column(split.feature);
    std::vector<std::size_t> l, r;
    for (auto row : node_rows[id]) (col[row] <= split.threshold ? l : r).push_back(row);
    tree.nodes[id].feature = static_cast<int>(split.feature);
    tree.nodes[id].threshold = split.threshold;
    tree.nodes[id].statistic = split.statistic;
    tree.nodes[id].p_value = split.p_value;
    tree.nodes[id].left = static_cast<int>(tree.nodes.size());
    add_leaf(std::move(l));
    tree.nodes[id].right = static_cast<int>(tree.nodes.size());
    add_leaf(std::move(r));
    ++leaves;
  }

  // Group 1 = best survival: undefined medians first (by final survival,
  // higher first), then descending median.
  struct LeafKey {
    std::size_t id;
    bool has_median;
    double median;
    double tail;
  };
  std::vector<LeafKey> keys;
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    if (tree.nodes[id].feature >= 0) continue;
    const auto km = stats::kaplan_meier(gather<SurvivalOutcome>(outcomes, node_rows[id]));
    const auto med = km.median();
    keys.push_back({id, med.has_value(), med.value_or(0.0), km.steps() ? km.survival.back() : 1.0});
  }
  std::sort(keys.begin(), keys.end(), [](const LeafKey& a, const LeafKey& b) {
    if (a.has_median != b.has_median) return !a.has_median;
    if (!a.has_median && a.tail != b.tail) return a.tail > b.tail;
    if (a.has_median && a.median != b.median) return a.median > b.median;
    return a.id < b.id;
  });
  tree.labels.assign(outcomes.size(), 0);
  for (std::size_t g = 0; g < keys.size(); ++g) {
    tree.nodes[keys[g].id].group = static_cast<int>(g + 1);
    for (auto row : node_rows[keys[g].id]) tree.labels[row] = static_cast<int>(g + 1);
  }
  tree.n_leaves = keys.size();
  return tree;
}

// ---------------------------------------------------------------------------
// Linear SVM

LinearSvm train_linear_svm(const FeatureTable& features, std::span<const int> y,
                           const SvmOptions& options) {
  if (features.rows() != y.size()) throw Error("features and labels differ in length");
  if (!(options.c > 0.0)) throw Error("SVM regularization constant must be positive");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1)
      pos = true;
    else if (v == -1)
      neg = true;
    else
      throw Error("SVM labels must be -1 or +1");
  }
  if (!pos || !neg) throw Error("one-sided boundary: both classes must be present");

  LinearSvm svm;
  auto [scaled, norm] = cox::standardize(features, cox::Normalization::zscore);
  svm.norm = norm;
  const std::size_t n = scaled.rows(), p = scaled.cols();
  // Row-major augmented design with a trailing 1 for the bias.
  std::vector<double> x(n * (p + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) x[i * (p + 1) + j] = scaled.at(i, j);
    x[i * (p + 1) + p] = 1.0;
  }
  std::vector<double> qd(n), alpha(n, 0.0), w(p + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= p; ++j) s += x[i * (p + 1) + j] * x[i * (p + 1) + j];
    qd[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(options.seed, {0x5F3u});
  const double c = options.c;

  for (std::size_t epoch = 0; epoch < options.max_iterations; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (auto i : order) {
      const double* xi = &x[i * (p + 1)];
      const double yi = static_cast<double>(y[i]);
      double dot = 0.0;
      for (std::size_t j = 0; j <= p; ++j) dot += w[j] * xi[j];
      const double g = yi * dot - 1.0;
      double pg = g;
      if (alpha[i] == 0.0)
        pg = std::min(g, 0.0);
      else if (alpha[i] == c)
        pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg != 0.0) {
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / qd[i], 0.0, c);
        const double delta = (alpha[i] - old) * yi;
        for (std::size_t j = 0; j <= p; ++j) w[j] += delta * xi[j];
      }
    }
    svm.iterations = epoch + 1;
    if (pg_max - pg_min <= options.tolerance) {
      svm.converged = true;
      break;
    }
  }
  svm.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(p));
  svm.bias = w[p];
  return svm;
}

double BoundaryHyperplane::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) throw Error("feature vector length does not match boundary");
  double v = intercept;
  for (std::size_t j = 0; j < x.size(); ++j) v += weights[j] * x[j];
  return v;
}

BoundaryHyperplane fit_boundary_svm(const FeatureTable& train, std::span<const int> train_labels,
                                    std::size_t k, const FeatureTable& test,
                                    std::span<const int> test_labels, const SvmOptions& options) {
  if (train.rows() != train_labels.size()) throw Error("features and labels differ in length");
  std::vector<int> y(train_labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = train_labels[i] > static_cast<int>(k) ? 1 : -1;
  if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), -1) == 0)
    throw Error("one-sided boundary " + std::to_string(k));

  SvmOptions opt = options;
  opt.seed = stream_seed(options.seed, {k});
  const auto svm = train_linear_svm(train, y, opt);

  BoundaryHyperplane b;
  b.boundary_index = k;
  b.feature_names = train.names();
  b.std_weights = svm.weights;
  b.std_intercept = svm.bias;
  b.intercept = svm.bias;
  for (std::size_t j = 0; j < svm.weights.size(); ++j) {
    const auto& np = svm.norm.params[j];
    b.weights.push_back(svm.weights[j] / np.scale);
    b.intercept -= svm.weights[j] * np.center / np.scale;
  }

  const auto eval_table = test.rows() > 0 ? test.select_columns(b.feature_names) : FeatureTable{};
  std::vector<double> scores;
  std::vector<int> cls;
  for (std::size_t i = 0; i < eval_table.rows(); ++i) {
    scores.push_back(b.decision(eval_table.row(i)));
    cls.push_back(test_labels[i] > static_cast<int>(k) ? 1 : 0);
  }
  try {
    b.test_auroc = metrics::auroc(scores, cls);
  } catch (const Error&) {
    b.test_auroc = std::numeric_limits<double>::quiet_NaN();
  }
  return b;
}

DecisionList assemble_decision_list(std::vector<BoundaryHyperplane> boundaries) {
  std::sort(boundaries.begin(), boundaries.end(),
            [](const auto& a, const auto& b) { return a.boundary_index < b.boundary_index; });
  for (std::size_t i = 0; i < boundaries.size(); ++i)
    if (boundaries[i].boundary_index != i + 1)
      throw Error("missing boundary " + std::to_string(i + 1));
  return DecisionList{std::move(boundaries)};
}

int assign_group(const DecisionList& list, std::span<const double> x) {
  for (const auto& b : list.boundaries)
    if (!b.high_side(x)) return static_cast<int>(b.boundary_index);
  return static_cast<int>(list.n_groups());
}

std::vector<int> assign_groups(const DecisionList& list, const FeatureTable& features) {
  if (list.boundaries.empty()) return std::vector<int>(features.rows(), 1);
  const auto table = features.select_columns(list.boundaries.front().feature_names);
  std::vector<int> out(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) out[i] = assign_group(list, table.row(i));
  return out;
}

std::string DecisionList::render(int digits) const {
  std::ostringstream os;
  auto num = [&](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    const auto& b = boundaries[i];
    os << (i == 0 ? "if " : "else if ");
    for (std::size_t j = 0; j < b.weights.size(); ++j) {
      if (j == 0)
        os << num(b.weights[j]);
      else
        os << (b.weights[j] < 0 ? " - " : " + ") << num(std::fabs(b.weights[j]));
      os << "*" << b.feature_names[j];
    }
    os << (b.intercept < 0 ? " - " : " + ") << num(std::fabs(b.intercept)) << " <= 0 then R"
       << b.boundary_index << "\n";
  }
  os << (boundaries.empty() ? "" : "else ") << "R" << n_groups() << "\n";
  return os.str();
}

}  // namespace isurv::stratify

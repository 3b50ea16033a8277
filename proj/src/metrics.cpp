#include "isurv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "isurv/random.hpp"

namespace isurv::metrics {

namespace {

void check_aligned(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes) {
  if (risks.size() != outcomes.size()) throw Error("risks and outcomes differ in length");
  for (double r : risks)
    if (!std::isfinite(r)) throw Error("non-finite risk score");
}

// Credit of pair (i, j) from i's side: i must fail first, or tie in time with
// i an event and j censored.
inline void score_pair(std::size_t i, std::size_t j, std::span<const double> risks,
                       std::span<const SurvivalOutcome> outcomes, std::uint64_t& halves,
                       std::uint64_t& comparable) {
  const auto& a = outcomes[i];
  const auto& b = outcomes[j];
  if (!a.event) return;
  if (!(a.time < b.time || (a.time == b.time && !b.event))) return;
  ++comparable;
  if (risks[i] > risks[j])
    halves += 2;
  else if (risks[i] == risks[j])
    halves += 1;
}

}  // namespace

double ConcordanceCounts::index() const {
  if (comparable == 0) throw DegenerateError("no comparable pairs");
  return static_cast<double>(concordant_halves) / (2.0 * static_cast<double>(comparable));
}

namespace serial {

ConcordanceCounts concordance_counts(std::span<const double> risks,
                                     std::span<const SurvivalOutcome> outcomes) {
  check_aligned(risks, outcomes);
  ConcordanceCounts c;
  for (std::size_t i = 0; i < risks.size(); ++i)
    for (std::size_t j = 0; j < risks.size(); ++j)
      if (i != j) score_pair(i, j, risks, outcomes, c.concordant_halves, c.comparable);
  return c;
}

}  // namespace serial

ConcordanceCounts concordance_counts(std::span<const double> risks,
                                     std::span<const SurvivalOutcome> outcomes) {
  check_aligned(risks, outcomes);
  const auto n = static_cast<std::int64_t>(risks.size());
  std::uint64_t halves = 0, comparable = 0;
#pragma omp parallel for schedule(static) reduction(+ : halves, comparable)
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      if (i != j)
        score_pair(static_cast<std::size_t>(i), static_cast<std::size_t>(j), risks, outcomes,
                   halves, comparable);
  return {halves, comparable};
}

double concordance_index(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes) {
  return concordance_counts(risks, outcomes).index();
}

double auroc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw Error("scores and labels differ in length");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> kept(scores.size());
  std::size_t npos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error("non-finite score");
    kept[i] = {scores[i], positive[i] != 0};
    npos += kept[i].positive ? 1 : 0;
  }
  const std::size_t nneg = kept.size() - npos;
  if (npos == 0) throw DegenerateError("no positive cases");
  if (nneg == 0) throw DegenerateError("no negative cases");

  // Average ranks over runs of tied scores.
  std::sort(kept.begin(), kept.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < kept.size()) {
    std::size_t j = i;
    std::size_t pos_in_run = 0;
    while (j < kept.size() && kept[j].score == kept[i].score) {
      pos_in_run += kept[j].positive ? 1 : 0;
      ++j;
    }
    rank_sum += 0.5 * static_cast<double>(i + 1 + j) * static_cast<double>(pos_in_run);
    i = j;
  }
  const double p = static_cast<double>(npos), q = static_cast<double>(nneg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double auc_at_horizon(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes,
                      double horizon) {
  check_aligned(risks, outcomes);
  if (!(horizon > 0.0)) throw Error("horizon must be positive");
  std::vector<double> kept;
  std::vector<int> label;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.time > horizon) {
      kept.push_back(risks[i]);
      label.push_back(0);
    } else if (o.event) {
      kept.push_back(risks[i]);
      label.push_back(1);
    }
  }
  const auto npos = static_cast<std::size_t>(std::count(label.begin(), label.end(), 1));
  if (npos == 0) throw DegenerateError("no positives before the horizon");
  if (npos == label.size()) throw DegenerateError("no negatives beyond the horizon");
  return auroc(kept, label);
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("percentile of empty sample");
  const double m = static_cast<double>(sorted.size());
  double h = std::clamp(m * q, 1.0, m);  // 1-based position
  // (1 - 0.95) / 2 * 1000 is 25.00000000000002; land on the order statistic.
  if (std::fabs(h - std::round(h)) <= 1e-9 * m) h = std::round(h);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo >= sorted.size() || frac == 0.0) return sorted[lo - 1];
  return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::size_t b) {
  Rng rng = make_rng(seed, {0xB007u, b});
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

namespace {

std::optional<double> evaluate_resample(const MetricFn& metric, std::span<const double> risks,
                                        std::span<const SurvivalOutcome> outcomes,
                                        std::uint64_t seed, std::size_t b) {
  const auto idx = resample_indices(risks.size(), seed, b);
  const auto r = gather(risks, idx);
  const auto o = gather(outcomes, idx);
  try {
    return metric(r, o);
  } catch (const Error&) {
    return std::nullopt;
  }
}

MetricResult summarize(double point, std::vector<std::optional<double>>& values, double level,
                       std::uint64_t seed) {
  MetricResult res;
  res.point = point;
  res.level = level;
  res.seed = seed;
  res.n_bootstrap = values.size();
  std::vector<double> ok;
  ok.reserve(values.size());
  for (const auto& v : values) {
    if (v)
      ok.push_back(*v);
    else
      ++res.n_degenerate;
  }
  if (2 * res.n_degenerate > res.n_bootstrap) throw Error("unstable bootstrap");
  std::sort(ok.begin(), ok.end());
  const double tail = (1.0 - level) / 2.0;
  res.ci_lower = percentile_sorted(ok, tail);
  res.ci_upper = percentile_sorted(ok, 1.0 - tail);
  return res;
}

void check_bootstrap_args(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes,
                          std::size_t n, double level) {
  check_aligned(risks, outcomes);
  if (risks.empty()) throw Error("bootstrap of empty sample");
  if (n == 0) throw Error("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
}

}  // namespace

namespace serial {

MetricResult bootstrap_ci(const MetricFn& metric, std::span<const double> risks,
                          std::span<const SurvivalOutcome> outcomes, std::size_t n, double level,
                          std::uint64_t seed) {
  check_bootstrap_args(risks, outcomes, n, level);
  const double point = metric(risks, outcomes);
  std::vector<std::optional<double>> values(n);
  for (std::size_t b = 0; b < n; ++b) values[b] = evaluate_resample(metric, risks, outcomes, seed, b);
  return summarize(point, values, level, seed);
}

}  // namespace serial

MetricResult bootstrap_ci(const MetricFn& metric, std::span<const double> risks,
                          std::span<const SurvivalOutcome> outcomes, std::size_t n, double level,
                          std::uint64_t seed) {
  check_bootstrap_args(risks, outcomes, n, level);
  const double point = metric(risks, outcomes);
  std::vector<std::optional<double>> values(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t b = 0; b < count; ++b)
    values[static_cast<std::size_t>(b)] =
        evaluate_resample(metric, risks, outcomes, seed, static_cast<std::size_t>(b));
  return summarize(point, values, level, seed);
}

}  // namespace isurv::metrics

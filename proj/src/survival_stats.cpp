#include "isurv/survival_stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace isurv::stats {

double chi2_sf(double x, double dof) {
  if (!(dof > 0.0)) throw Error("chi-square dof must be positive");
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double normal_two_sided_p(double z) {
  if (std::isnan(z)) return 1.0;
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

double KmCurve::survival_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

std::optional<double> KmCurve::median() const {
  for (std::size_t i = 0; i < steps(); ++i)
    if (survival[i] <= 0.5) return times[i];
  return std::nullopt;
}

namespace {

std::vector<std::size_t> time_order(std::span<const SurvivalOutcome> outcomes) {
  std::vector<std::size_t> idx(outcomes.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // events before censorings at equal times
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (outcomes[a].time != outcomes[b].time) return outcomes[a].time < outcomes[b].time;
    return outcomes[a].event && !outcomes[b].event;
  });
  return idx;
}

}  // namespace

KmCurve kaplan_meier(std::span<const SurvivalOutcome> outcomes) {
  if (outcomes.empty()) throw Error("empty cohort");
  validate_outcomes(outcomes);
  const auto idx = time_order(outcomes);

  KmCurve km;
  std::size_t at_risk = outcomes.size();
  double s = 1.0;
  double greenwood = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = outcomes[idx[i]].time;
    std::size_t d = 0, c = 0;
    while (i < idx.size() && outcomes[idx[i]].time == t) {
      (outcomes[idx[i]].event ? d : c) += 1;
      ++i;
    }
    if (d > 0) {
      const double n = static_cast<double>(at_risk);
      const double dd = static_cast<double>(d);
      s *= 1.0 - dd / n;
      if (d < at_risk) greenwood += dd / (n * (n - dd));

      double lo = 0.0, hi = 0.0, var = 0.0;
      if (s > 0.0) {
        var = s * s * greenwood;
        const double log_s = std::log(s);
        if (log_s < 0.0) {
          const double se = std::sqrt(greenwood) / std::fabs(log_s);
          lo = std::pow(s, std::exp(kZ95 * se));
          hi = std::pow(s, std::exp(-kZ95 * se));
        } else {
          lo = hi = s;
        }
      }
      km.times.push_back(t);
      km.survival.push_back(s);
      km.variance.push_back(var);
      km.ci_lower.push_back(std::clamp(std::min(lo, s), 0.0, 1.0));
      km.ci_upper.push_back(std::clamp(std::max(hi, s), 0.0, 1.0));
      km.n_at_risk.push_back(at_risk);
      km.n_events.push_back(d);
    }
    at_risk -= d + c;
  }
  return km;
}

LogRankResult logrank_two_sample(std::span<const SurvivalOutcome> a,
                                 std::span<const SurvivalOutcome> b) {
  if (a.empty() || b.empty()) throw Error("log-rank test requires two non-empty groups");
  validate_outcomes(a);
  validate_outcomes(b);
  if (count_events(a) + count_events(b) == 0) throw DegenerateError("degenerate test: no events");

  struct Entry {
    double time;
    bool event;
    bool first;
  };
  std::vector<Entry> pooled;
  pooled.reserve(a.size() + b.size());
  for (const auto& o : a) pooled.push_back({o.time, o.event, true});
  for (const auto& o : b) pooled.push_back({o.time, o.event, false});
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& x, const Entry& y) { return x.time < y.time; });

  // U accumulates (d1*n2 - d2*n1)/n so swapping groups negates it exactly.
  double n1 = static_cast<double>(a.size());
  double n2 = static_cast<double>(b.size());
  double u = 0.0, v = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    const double t = pooled[i].time;
    double d1 = 0, d2 = 0, c1 = 0, c2 = 0;
    while (i < pooled.size() && pooled[i].time == t) {
      const auto& e = pooled[i];
      if (e.event)
        (e.first ? d1 : d2) += 1;
      else
        (e.first ? c1 : c2) += 1;
      ++i;
    }
    const double d = d1 + d2;
    const double n = n1 + n2;
    if (d > 0) {
      u += (d1 * n2 - d2 * n1) / n;
      if (n > 1) v += d * (n1 * n2) * (n - d) / (n * n * (n - 1));
    }
    n1 -= d1 + c1;
    n2 -= d2 + c2;
  }
  if (!(v > 0.0)) throw DegenerateError("degenerate test: zero variance");
  LogRankResult r;
  r.statistic = u * u / v;
  r.dof = 1;
  r.p_value = chi2_sf(r.statistic, 1.0);
  return r;
}

PairwiseLogRank pairwise_logrank(const std::vector<Outcomes>& groups, double alpha, PairMode mode) {
  const std::size_t k = groups.size();
  if (k < 2) throw Error("pairwise log-rank requires at least 2 groups");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  for (std::size_t g = 0; g < k; ++g)
    if (groups[g].empty()) throw Error("group " + std::to_string(g + 1) + " is empty");

  PairwiseLogRank rep;
  rep.n_groups = k;
  rep.mode = mode;
  rep.alpha = alpha;
  rep.n_tests = mode == PairMode::all ? k * (k - 1) / 2 : k - 1;
  rep.corrected_alpha = alpha / static_cast<double>(rep.n_tests);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.statistic.assign(k * k, nan);
  rep.p_value.assign(k * k, nan);

  bool distinct = true;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (mode == PairMode::consecutive && j != i + 1) continue;
      LogRankResult r;
      try {
        r = logrank_two_sample(groups[i], groups[j]);
      } catch (const DegenerateError& e) {
        throw DegenerateError("pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                              "): " + e.what());
      } catch (const Error& e) {
        throw Error("pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "): " +
                    e.what());
      }
      rep.statistic[i * k + j] = rep.statistic[j * k + i] = r.statistic;
      rep.p_value[i * k + j] = rep.p_value[j * k + i] = r.p_value;
      if (!(r.p_value <= rep.corrected_alpha)) distinct = false;
    }
  }
  rep.all_distinct = distinct;
  return rep;
}

std::vector<Outcomes> split_by_label(std::span<const SurvivalOutcome> outcomes,
                                     std::span<const int> labels, std::size_t n_groups) {
  if (labels.size() != outcomes.size()) throw Error("labels and outcomes differ in length");
  std::vector<Outcomes> groups(n_groups);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int g = labels[i];
    if (g < 1 || static_cast<std::size_t>(g) > n_groups)
      throw Error("group label " + std::to_string(g) + " out of range");
    groups[static_cast<std::size_t>(g - 1)].push_back(outcomes[i]);
  }
  return groups;
}

}  // namespace isurv::stats

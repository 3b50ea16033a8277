// Parallel kernels against their serial references, across thread counts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "isurv/gp.hpp"
#include "isurv/metrics.hpp"
#include "isurv/parallel.hpp"
#include "isurv/stratify.hpp"

using namespace isurv;

namespace {

const int kThreads[] = {1, 2, 4, 7};

struct Cohort {
  std::vector<double> risk;
  Outcomes outcomes;
  FeatureTable features;
};

Cohort cohort(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::exponential_distribution<double> e;
  Cohort c;
  std::vector<double> a(n), b(n), k(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = z(rng);
    b[i] = z(rng);
    k[i] = static_cast<double>(rng() % 4);
    // Rounded times and a discrete risk keep plenty of ties.
    const double t = std::ceil(30.0 * e(rng) / std::exp(0.7 * a[i]));
    c.outcomes.push_back({t, rng() % 4 != 0});
    c.risk.push_back(std::round(4.0 * a[i]) / 4.0);
  }
  c.features.add_column("a", a);
  c.features.add_column("b", b);
  c.features.add_column("k", k);
  return c;
}

bool same(const metrics::MetricResult& x, const metrics::MetricResult& y) {
  return x.point == y.point && x.ci_lower == y.ci_lower && x.ci_upper == y.ci_upper &&
         x.n_degenerate == y.n_degenerate;
}

}  // namespace

TEST_CASE("concordance counts") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = cohort(700, seed);
    const auto ref = metrics::serial::concordance_counts(c.risk, c.outcomes);
    for (int t : kThreads) {
      set_num_threads(t);
      const auto par = metrics::concordance_counts(c.risk, c.outcomes);
      CHECK(par.concordant_halves == ref.concordant_halves);
      CHECK(par.comparable == ref.comparable);
    }
  }
}

TEST_CASE("bootstrap confidence interval") {
  const auto c = cohort(300, 9);
  const metrics::MetricFn cidx = [](std::span<const double> r, std::span<const SurvivalOutcome> o) {
    return metrics::concordance_index(r, o);
  };
  const auto ref = metrics::serial::bootstrap_ci(cidx, c.risk, c.outcomes, 200, 0.95, 42);
  for (int t : kThreads) {
    set_num_threads(t);
    CHECK(same(metrics::bootstrap_ci(cidx, c.risk, c.outcomes, 200, 0.95, 42), ref));
  }
}

TEST_CASE("gene-pool optimal mixing generation") {
  const auto c = cohort(120, 3);
  const gp::Fitness f(c.features, c.risk);
  Rng rng(5);
  std::vector<gp::Individual> pop;
  for (int i = 0; i < 48; ++i) {
    gp::Individual ind{gp::random_tree(3, f.variables(), {-5.0, 5.0}, i % 2 == 0, rng), 0.0};
    ind.mse = f.evaluate(ind.tree);
    pop.push_back(ind);
  }
  const auto linkage = gp::random_tree_linkage(gp::ExprTree::slot_count(3), rng);
  gp::GenerationStats ref_stats;
  const auto ref = gp::serial::gom_generation(pop, linkage, f, 11, &ref_stats);
  for (int t : kThreads) {
    set_num_threads(t);
    gp::GenerationStats st;
    const auto par = gp::gom_generation(pop, linkage, f, 11, &st);
    REQUIRE(par.size() == ref.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
      CHECK(par[i].tree == ref[i].tree);
      CHECK(par[i].mse == ref[i].mse);
    }
    CHECK(st.evaluations == ref_stats.evaluations);
    CHECK(st.accepted == ref_stats.accepted);
  }
}

TEST_CASE("survival tree split search") {
  const auto c = cohort(400, 12);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 400; i += 2) rows.push_back(i);
  stratify::TreeConfig cfg;
  cfg.min_leaf = 20;
  const auto ref = stratify::serial::best_split(c.features, c.outcomes, rows, cfg);
  REQUIRE(ref.found);
  for (int t : kThreads) {
    set_num_threads(t);
    const auto par = stratify::best_split(c.features, c.outcomes, rows, cfg);
    CHECK(par.found == ref.found);
    CHECK(par.feature == ref.feature);
    CHECK(par.threshold == ref.threshold);
    CHECK(par.statistic == ref.statistic);
    CHECK(par.p_value == ref.p_value);
  }
}

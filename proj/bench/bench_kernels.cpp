#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <random>

#include "isurv/gp.hpp"
#include "isurv/metrics.hpp"
#include "isurv/stratify.hpp"

using namespace isurv;

namespace {

struct Cohort {
  std::vector<double> risk;
  Outcomes outcomes;
  FeatureTable features;
};

const Cohort& cohort(std::size_t n) {
  static std::map<std::size_t, Cohort> cache;
  auto& c = cache[n];
  if (!c.risk.empty()) return c;
  std::mt19937_64 rng(n);
  std::normal_distribution<double> z;
  std::exponential_distribution<double> e;
  std::vector<double> a(n), b(n), k(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = z(rng);
    b[i] = z(rng);
    k[i] = static_cast<double>(rng() % 6);
    c.outcomes.push_back({std::ceil(100.0 * e(rng) / std::exp(0.7 * a[i])), rng() % 4 != 0});
    c.risk.push_back(a[i]);
  }
  c.features.add_column("a", a);
  c.features.add_column("b", b);
  c.features.add_column("k", k);
  return c;
}

const metrics::MetricFn kCindex = [](std::span<const double> r, std::span<const SurvivalOutcome> o) {
  return metrics::concordance_index(r, o);
};

template <bool Parallel>
void BM_Concordance(benchmark::State& state) {
  const auto& c = cohort(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto r = Parallel ? metrics::concordance_counts(c.risk, c.outcomes)
                      : metrics::serial::concordance_counts(c.risk, c.outcomes);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_Bootstrap(benchmark::State& state) {
  const auto& c = cohort(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto r = Parallel ? metrics::bootstrap_ci(kCindex, c.risk, c.outcomes, 200, 0.95, 1)
                      : metrics::serial::bootstrap_ci(kCindex, c.risk, c.outcomes, 200, 0.95, 1);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_BestSplit(benchmark::State& state) {
  const auto& c = cohort(static_cast<std::size_t>(state.range(0)));
  std::vector<std::size_t> rows(c.risk.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const stratify::TreeConfig cfg;
  for (auto _ : state) {
    auto r = Parallel ? stratify::best_split(c.features, c.outcomes, rows, cfg)
                      : stratify::serial::best_split(c.features, c.outcomes, rows, cfg);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_GomGeneration(benchmark::State& state) {
  const auto& c = cohort(500);
  const gp::Fitness f(c.features, c.risk);
  Rng rng(3);
  std::vector<gp::Individual> pop;
  for (int i = 0; i < state.range(0); ++i) {
    gp::Individual ind{gp::random_tree(3, f.variables(), {-5.0, 5.0}, i % 2 == 0, rng), 0.0};
    ind.mse = f.evaluate(ind.tree);
    pop.push_back(ind);
  }
  const auto linkage = gp::univariate_linkage(gp::ExprTree::slot_count(3));
  for (auto _ : state) {
    auto next = Parallel ? gp::gom_generation(pop, linkage, f, 1) : gp::serial::gom_generation(pop, linkage, f, 1);
    benchmark::DoNotOptimize(next);
  }
}

}  // namespace

BENCHMARK(BM_Concordance<false>)->Arg(1000)->Arg(5000);
BENCHMARK(BM_Concordance<true>)->Arg(1000)->Arg(5000);
BENCHMARK(BM_Bootstrap<false>)->Arg(500);
BENCHMARK(BM_Bootstrap<true>)->Arg(500);
BENCHMARK(BM_BestSplit<false>)->Arg(1000);
BENCHMARK(BM_BestSplit<true>)->Arg(1000);
BENCHMARK(BM_GomGeneration<false>)->Arg(64);
BENCHMARK(BM_GomGeneration<true>)->Arg(64);

BENCHMARK_MAIN();

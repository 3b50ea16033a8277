#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "isurv/stratify.hpp"
#include "isurv/synth.hpp"

using namespace isurv;
using namespace isurv::stratify;

namespace {

struct Cohort {
  std::vector<double> x;
  Outcomes outcomes;
};

// Exponential survival with log-hazard log(hr) * group, light censoring.
Cohort hazard_groups(std::size_t groups, std::size_t per_group, double hr, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e1(1.0);
  Cohort c;
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t i = 0; i < per_group; ++i) {
      const double t = 100.0 * e1(rng) / std::pow(hr, static_cast<double>(g));
      const double cens = 400.0 * e1(rng);
      c.x.push_back(static_cast<double>(g));
      c.outcomes.push_back({std::min(t, cens), t <= cens});
    }
  return c;
}

synth::SynthData six_strata(std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.n_subjects = 1800;
  cfg.strata = 6;
  cfg.strata_hazard_ratio = 2.0;
  cfg.censoring_target = 0.3;
  cfg.test_fraction = 0.0;
  cfg.rng_seed = seed;
  return synth::synth_survival(cfg);
}

}  // namespace

TEST_CASE("quantile_stratify") {
  std::vector<double> ten(10);
  std::iota(ten.begin(), ten.end(), 1.0);
  CHECK(quantile_stratify(ten, 2) == std::vector<int>{1, 1, 1, 1, 1, 2, 2, 2, 2, 2});
  std::vector<double> six{6, 5, 4, 3, 2, 1};
  CHECK(quantile_stratify(six, 6) == std::vector<int>{6, 5, 4, 3, 2, 1});
  std::vector<double> seven{1, 2, 3, 4, 5, 6, 7};
  auto l7 = quantile_stratify(seven, 2);
  CHECK(std::count(l7.begin(), l7.end(), 1) == 4);
  CHECK(std::count(l7.begin(), l7.end(), 2) == 3);
  CHECK_THROWS_AS(quantile_stratify(seven, 8), Error);
  CHECK_THROWS_AS(quantile_stratify(seven, 1), Error);
  // Stable sort: equal risks keep subject order.
  CHECK(quantile_stratify(std::vector<double>{1, 1, 1, 1}, 2) == std::vector<int>{1, 1, 2, 2});
}

TEST_CASE("quantile_stratify properties") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 20 + rep * 7, groups = 2 + rep % 5;
    std::vector<double> r(n), tr(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = std::round(nd(rng) * 3);
      tr[i] = std::exp(r[i]) * 5 - 1;
    }
    const auto l = quantile_stratify(r, groups);
    CHECK(quantile_stratify(tr, groups) == l);
    std::vector<std::size_t> sizes(groups, 0);
    std::vector<double> mean(groups, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sizes[l[i] - 1]++;
      mean[l[i] - 1] += r[i];
    }
    const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*mx - *mn <= 1);
    CHECK(std::is_sorted(sizes.rbegin(), sizes.rend()));
    for (std::size_t g = 0; g < groups; ++g) mean[g] /= static_cast<double>(sizes[g]);
    CHECK(std::is_sorted(mean.begin(), mean.end()));
  }
}

TEST_CASE("cut points carry train bins to new rows") {
  std::vector<double> r{0.1, 0.5, 0.2, 0.9, 0.7, 0.3};
  const auto l = quantile_stratify(r, 3);
  const auto cuts = cut_points(r, l, 3);
  CHECK(cuts == std::vector<double>{0.2, 0.5});
  CHECK(apply_cut_points(r, cuts) == l);
  CHECK(apply_cut_points(std::vector<double>{-5, 0.2, 0.21, 0.5, 0.6, 99}, cuts) == std::vector<int>{1, 1, 2, 2, 3, 3});
}

TEST_CASE("select_group_count: two hazards") {
  const auto c = hazard_groups(2, 200, 10.0, 1);
  const auto res = select_group_count(c.x, c.outcomes);
  CHECK(res.n_groups >= 2);
  CHECK(res.significant);
  CHECK(res.all_distinct);
  REQUIRE(res.pairwise);
  for (std::size_t i = 0; i < res.n_groups; ++i)
    for (std::size_t j = i + 1; j < res.n_groups; ++j) CHECK(res.pairwise->p(i, j) <= res.corrected_alpha);
  CHECK(res.km_per_group.size() == res.n_groups);
  CHECK(res.group_cindex.has_value());
  CHECK(res.candidates.size() == 5);
}

TEST_CASE("select_group_count: identical outcomes give one flagged group") {
  Outcomes o(60, SurvivalOutcome{10.0, true});
  std::vector<double> r(60);
  std::iota(r.begin(), r.end(), 0.0);
  GroupingOptions opt;
  opt.with_metrics = false;
  const auto res = select_group_count(r, o, opt);
  CHECK(res.n_groups == 1);
  CHECK_FALSE(res.significant);
  CHECK(res.km_per_group.size() == 1);
  CHECK(std::all_of(res.labels.begin(), res.labels.end(), [](int l) { return l == 1; }));
  Outcomes none(10, SurvivalOutcome{10.0, false});
  CHECK_THROWS_AS(select_group_count(std::vector<double>(10, 0.0), none, opt), DegenerateError);
}

TEST_CASE("select_group_count: tied risks stay in one group") {
  // Three strongly separated strata of 200, risk equal to the stratum.
  synth::SynthConfig cfg;
  cfg.n_subjects = 600;
  cfg.strata = 3;
  cfg.strata_hazard_ratio = 4.0;
  cfg.test_fraction = 0.0;
  cfg.rng_seed = 2;
  const auto d = synth::synth_survival(cfg);
  const auto risk = d.covariates.column("stratum");
  GroupingOptions opt;
  opt.with_metrics = false;
  const auto res = select_group_count(risk, d.outcomes, opt);
  CHECK(res.n_groups == 3);
  for (const auto& c : res.candidates) CHECK(c.tied_boundary == (c.n_groups > 3));
  CHECK(apply_cut_points(risk, res.cut_points) == res.labels);
  for (std::size_t i = 0; i < risk.size(); ++i) CHECK(res.labels[i] == static_cast<int>(risk[i]));

  // Uneven tie runs: quantile boundaries fall inside runs, labels follow the cut points.
  std::vector<double> uneven;
  Outcomes uo;
  for (std::size_t i = 0; i < 610; ++i) {
    const std::size_t s = i < 190 ? 1 : i < 410 ? 2 : 3;
    uneven.push_back(static_cast<double>(s));
    uo.push_back(d.outcomes[(s - 1) * 200 + i % 190]);
  }
  const auto ur = select_group_count(uneven, uo, opt);
  CHECK(ur.n_groups == 3);
  CHECK(apply_cut_points(uneven, ur.cut_points) == ur.labels);
}

TEST_CASE("select_group_count: six strata") {
  const auto d = six_strata(5);
  GroupingOptions opt;
  opt.with_metrics = false;
  const auto risk = d.covariates.column("stratum");
  const auto res = select_group_count(risk, d.outcomes, opt);
  CHECK(res.n_groups == 6);
  REQUIRE(res.pairwise);
  CHECK(res.pairwise->n_tests == 15);
  CHECK(res.all_distinct);

  // Stochastic ordering of group curves, allowing only CI-overlapping violations.
  for (std::size_t g = 0; g + 1 < 6; ++g) {
    const auto& a = res.km_per_group[g];
    const auto& b = res.km_per_group[g + 1];
    for (std::size_t s = 0; s < b.steps(); ++s) {
      const double t = b.times[s];
      const double sa = a.survival_at(t), sb = b.survival[s];
      if (sa < sb) {
        std::size_t ia = std::upper_bound(a.times.begin(), a.times.end(), t) - a.times.begin();
        const double upper_a = ia == 0 ? 1.0 : a.ci_upper[ia - 1];
        CHECK(upper_a >= b.ci_lower[s]);
      }
    }
  }

  // A coarse two-way split of the same cohort ranks worse than six groups.
  std::vector<double> two;
  for (double s : risk) two.push_back(s <= 3 ? 1.0 : 2.0);
  CHECK(metrics::concordance_index(risk, d.outcomes) > metrics::concordance_index(two, d.outcomes));
}

TEST_CASE("select_group_count is deterministic") {
  const auto c = hazard_groups(3, 100, 3.0, 9);
  GroupingOptions opt;
  opt.n_bootstrap = 100;
  const auto a = select_group_count(c.x, c.outcomes, opt), b = select_group_count(c.x, c.outcomes, opt);
  CHECK(a.labels == b.labels);
  CHECK(a.pairwise->p_value.size() == b.pairwise->p_value.size());
  CHECK(a.group_cindex->ci_lower == b.group_cindex->ci_lower);
}

TEST_CASE("tnm_stratify") {
  std::vector<int> codes{0, 1, 2, 3, 4, 5};
  CHECK(tnm_stratify(std::vector<double>{5, 0, 1, 2, 3, 4}, codes) == std::vector<int>{6, 1, 2, 3, 4, 5});
  CHECK(tnm_stratify(std::vector<double>{3, 3, 3}, codes) == std::vector<int>{1, 1, 1});
  CHECK(tnm_stratify(std::vector<double>{4, 1, 4}, codes) == std::vector<int>{2, 1, 2});
  CHECK_THROWS_WITH(tnm_stratify(std::vector<double>{1, 7}, codes), doctest::Contains("unseen stage code"));
}

TEST_CASE("survival tree: noise gives a single leaf") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  std::exponential_distribution<double> e1(1.0);
  int single = 0;
  for (int rep = 0; rep < 10; ++rep) {
    FeatureTable f;
    std::vector<double> x(100);
    for (auto& v : x) v = nd(rng);
    f.add_column("x", x);
    Outcomes o;
    for (int i = 0; i < 100; ++i) o.push_back({e1(rng), true});
    const auto root = best_split(f, o, [] {
      std::vector<std::size_t> r(100);
      std::iota(r.begin(), r.end(), std::size_t{0});
      return r;
    }(), {});
    const auto tree = fit_survival_tree(f, o);
    if (!root.found || root.p_value > 0.05) {
      CHECK(tree.n_leaves == 1);
      ++single;
    }
  }
  CHECK(single >= 5);
}

TEST_CASE("survival tree: separating feature") {
  const auto c = hazard_groups(2, 150, 8.0, 2);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  FeatureTable f;
  std::vector<double> noise(c.x.size());
  for (auto& v : noise) v = nd(rng);
  f.add_column("noise", noise);
  f.add_column("grp", c.x);
  TreeConfig cfg;
  cfg.max_leaves = 2;
  const auto tree = fit_survival_tree(f, c.outcomes, cfg);
  CHECK(tree.n_leaves == 2);
  CHECK(tree.nodes[0].feature == 1);
  CHECK(tree.nodes[0].threshold == 0.5);
  // Low-hazard group (grp = 0) survives longest, so it is group 1.
  CHECK(tree.labels[0] == 1);
  CHECK(tree.labels.back() == 2);
  CHECK_THROWS_WITH(fit_survival_tree(f.select_rows(std::vector<std::size_t>{0, 1, 2}),
                                      Outcomes(c.outcomes.begin(), c.outcomes.begin() + 3)),
                    doctest::Contains("too few subjects"));
}

TEST_CASE("survival tree: leaf cap and permutation invariance") {
  const auto d = six_strata(8);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  FeatureTable f;
  f.add_column("stratum", {d.covariates.column("stratum").begin(), d.covariates.column("stratum").end()});
  std::vector<double> z(d.outcomes.size());
  for (auto& v : z) v = nd(rng);
  f.add_column("z", z);
  const auto tree = fit_survival_tree(f, d.outcomes);
  CHECK(tree.n_leaves <= 6);
  CHECK(tree.n_leaves >= 3);
  CHECK(tree.assign(f) == tree.labels);

  std::vector<std::size_t> perm(d.outcomes.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto ptree = fit_survival_tree(f.select_rows(perm), gather<SurvivalOutcome>(d.outcomes, perm));
  CHECK(ptree.render() == tree.render());
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(ptree.labels[i] == tree.labels[perm[i]]);
}

TEST_CASE("boundary svm: separable, shuffled, swapped") {
  FeatureTable train, test;
  std::vector<double> x, xt;
  std::vector<int> labels, tl;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i);
    labels.push_back(i < 20 ? 1 : 2);
  }
  for (int i = 0; i < 10; ++i) {
    xt.push_back(i * 4 + 1.5);
    tl.push_back(i < 5 ? 1 : 2);
  }
  train.add_column("x", x);
  test.add_column("x", xt);
  const auto b = fit_boundary_svm(train, labels, 1, test, tl);
  CHECK(b.test_auroc == 1.0);
  CHECK(b.weights[0] > 0.0);
  CHECK(std::isfinite(b.intercept));
  CHECK(b.decision(std::vector<double>{0.0}) <= 0.0);
  CHECK(b.high_side(std::vector<double>{39.0}));
  CHECK_THROWS_WITH(fit_boundary_svm(train, labels, 2, test, tl), doctest::Contains("one-sided boundary"));

  // Swapped classes flip the side of every subject.
  SvmOptions opt;
  std::vector<int> y(labels.size()), neg(labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = labels[i] == 2 ? 1 : -1;
    neg[i] = -y[i];
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  FeatureTable noisy;
  std::vector<double> xn(x);
  for (auto& v : xn) v += 8.0 * nd(rng);
  noisy.add_column("x", xn);
  const auto s1 = train_linear_svm(noisy, y, opt), s2 = train_linear_svm(noisy, neg, opt);
  for (std::size_t i = 0; i < xn.size(); ++i) {
    const double z = (xn[i] - s1.norm.params[0].center) / s1.norm.params[0].scale;
    const double d1 = s1.weights[0] * z + s1.bias, d2 = s2.weights[0] * z + s2.bias;
    CHECK((d1 > 0) != (d2 > 0));
  }
}

TEST_CASE("boundary svm: random labels give chance auroc") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.5);
  FeatureTable train, test;
  std::vector<double> a(500), b(500), at(500), bt(500);
  std::vector<int> l(500), lt(500);
  for (std::size_t i = 0; i < 500; ++i) {
    a[i] = nd(rng);
    b[i] = nd(rng);
    at[i] = nd(rng);
    bt[i] = nd(rng);
    l[i] = coin(rng) ? 2 : 1;
    lt[i] = coin(rng) ? 2 : 1;
  }
  train.add_column("a", a);
  train.add_column("b", b);
  test.add_column("a", at);
  test.add_column("b", bt);
  const auto h = fit_boundary_svm(train, l, 1, test, lt);
  CHECK(h.test_auroc >= 0.4);
  CHECK(h.test_auroc <= 0.6);
}

TEST_CASE("decision list") {
  auto make = [](std::size_t k, double threshold) {
    BoundaryHyperplane h;
    h.boundary_index = k;
    h.feature_names = {"x"};
    h.weights = {1.0};
    h.intercept = -threshold;
    return h;
  };
  const auto list = assemble_decision_list({make(1, 1.0), make(2, 2.0), make(3, 3.0)});
  CHECK(list.n_groups() == 4);
  CHECK(assign_group(list, std::vector<double>{-100.0}) == 1);
  CHECK(assign_group(list, std::vector<double>{1.5}) == 2);
  CHECK(assign_group(list, std::vector<double>{2.0}) == 2);
  CHECK(assign_group(list, std::vector<double>{100.0}) == 4);
  CHECK_THROWS_WITH(assemble_decision_list({make(1, 1.0), make(3, 3.0)}), doctest::Contains("missing boundary"));
  CHECK(list.render() ==
        "if 1*x - 1 <= 0 then R1\nelse if 1*x - 2 <= 0 then R2\nelse if 1*x - 3 <= 0 then R3\nelse R4\n");
  auto neg = make(1, -0.5);
  neg.feature_names = {"x", "y"};
  neg.weights = {-2.0, -0.25};
  CHECK(assemble_decision_list({neg}).render() == "if -2*x - 0.25*y + 0.5 <= 0 then R1\nelse R2\n");

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 200; ++i) {
    const int g = assign_group(list, std::vector<double>{u(rng)});
    CHECK(g >= 1);
    CHECK(g <= 4);
  }
}

TEST_CASE("decision list reproduces quantile labels on separable strata") {
  const auto d = six_strata(12);
  FeatureTable f;
  const auto s = d.covariates.column("stratum");
  f.add_column("stratum", {s.begin(), s.end()});
  const auto labels = quantile_stratify(s, 6);
  std::vector<BoundaryHyperplane> hs;
  for (std::size_t k = 1; k < 6; ++k) hs.push_back(fit_boundary_svm(f, labels, k, f, labels));
  const auto list = assemble_decision_list(hs);
  const auto assigned = assign_groups(list, f);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) agree += assigned[i] == labels[i];
  CHECK(static_cast<double>(agree) / labels.size() >= 0.9);
}

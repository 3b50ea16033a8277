// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isurv/cox.hpp"
#include "isurv/dataset.hpp"
#include "isurv/expr.hpp"
#include "isurv/gp.hpp"
#include "isurv/metrics.hpp"
#include "isurv/pipeline.hpp"
#include "isurv/survival_stats.hpp"
#include "isurv/synth.hpp"

using namespace isurv;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

Outcome fail_unless(bool ok, std::string detail) { return {ok, std::move(detail)}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    o.pass = false;
    o.detail += fmt("; over the %.0f s budget", budget_s);
  }
  if (!o.pass) ++failures;
  std::printf("%s %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
}

Outcomes make(const std::vector<double>& t, const std::vector<bool>& e) {
  Outcomes o;
  for (std::size_t i = 0; i < t.size(); ++i) o.push_back({t[i], e[i]});
  return o;
}

// --- oracles ---------------------------------------------------------------

std::vector<double> distinct_event_times(const Outcomes& o) {
  std::vector<double> times;
  for (auto& s : o)
    if (s.event) times.push_back(s.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::map<double, double> km_oracle(const Outcomes& o) {
  std::map<double, double> out;
  double surv = 1.0;
  for (double t : distinct_event_times(o)) {
    double n = 0, d = 0;
    for (auto& s : o) {
      n += s.time >= t;
      d += s.time == t && s.event;
    }
    surv *= 1.0 - d / n;
    out[t] = surv;
  }
  return out;
}

double score_1d(const std::vector<double>& x, const Outcomes& o, double b) {
  double s = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (!o[i].event) continue;
    double s0 = 0, s1 = 0;
    for (std::size_t k = 0; k < o.size(); ++k)
      if (o[k].time >= o[i].time) {
        s0 += std::exp(b * x[k]);
        s1 += x[k] * std::exp(b * x[k]);
      }
    s += x[i] - s1 / s0;
  }
  return s;
}

std::optional<double> score_root(const std::vector<double>& x, const Outcomes& o) {
  double prev_b = -10.0, prev = score_1d(x, o, prev_b);
  for (int g = 1; g <= 2000; ++g) {
    const double b = -10.0 + g * 0.01, s = score_1d(x, o, b);
    if ((prev > 0) != (s > 0)) {
      double lo = prev_b, hi = b, slo = prev;
      for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi), sm = score_1d(x, o, mid);
        if ((sm > 0) == (slo > 0)) {
          lo = mid;
          slo = sm;
        } else {
          hi = mid;
        }
      }
      return 0.5 * (lo + hi);
    }
    prev_b = b;
    prev = s;
  }
  return std::nullopt;
}

double brute_cindex(const std::vector<double>& r, const Outcomes& o) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < o.size(); ++i)
    for (std::size_t j = 0; j < o.size(); ++j) {
      if (i == j || !o[i].event) continue;
      if (!(o[i].time < o[j].time || (o[i].time == o[j].time && !o[j].event))) continue;
      den += 1;
      num += r[i] > r[j] ? 1.0 : r[i] == r[j] ? 0.5 : 0.0;
    }
  return num / den;
}

// --- criteria --------------------------------------------------------------

Outcome expression_fixtures() {
  using gp::Row;
  auto row = [](double smoking, double hpv, double chemo, double ecog, double age, double stage, double t) {
    return Row{{"smoking_status", smoking}, {"HPV", hpv},     {"chemo", chemo}, {"ECOG_PS", ecog},
               {"age_norm", age},           {"stage", stage}, {"Stage", stage}, {"T", t}};
  };
  struct Fixture {
    const char* text;
    Row at;
    double expected;
  };
  const std::vector<Fixture> fixtures{
      {"If(smoking_status < age_norm) Then(0.516) Else(0.397)", row(0, 0, 0, 0, 0.5, 0, 0), 0.516},
      {"If(smoking_status < age_norm) Then(0.516) Else(0.397)", row(1, 0, 0, 0, 0.5, 0, 0), 0.397},
      {"(4.99 + stage - chemo - HPV) / 17.2", row(0, 1, 1, 0, 0, 3, 0), (4.99 + 3 - 1 - 1) / 17.2},
      {"1 / (smoking_status + HPV + 4.82) + (chemo + 0.202 * ECOG_PS) / (4.76 - age_norm)", row(0, 0, 0, 0, 0, 0, 0),
       1.0 / 4.82},
      {"If(stage < 3.33) Then(0.454) Else(0.502)", row(0, 0, 0, 0, 0, 2, 0), 0.454},
      {"If(stage < 3.33) Then(0.454) Else(0.502)", row(0, 0, 0, 0, 0, 4, 0), 0.502},
      {"0.013 * (T + stage) + 0.415", row(0, 0, 0, 0, 0, 2, 1), 0.454},
      {"(stage + 16.0) / (age_norm + smoking_status + HPV + chemo + 39.6)", row(0, 0, 0, 0, 0, 0, 0), 16.0 / 39.6},
      {"If(smoking_status < ECOG_PS) Then(0.552) Else(0.431)", row(0, 0, 0, 1, 0, 0, 0), 0.552},
      {"(T - chemo + age_norm + 3.86) / (18.1 - Stage + smoking_status)", row(0, 0, 0, 0, 0, 0, 0), 3.86 / 18.1},
      {"(10.826 + ECOG_PS + T - chemo) / (31.017 + Stage * (smoking_status - age_norm))", row(0, 0, 0, 0, 0, 0, 0),
       10.826 / 31.017},
  };
  double worst = 0.0;
  for (const auto& f : fixtures) worst = std::max(worst, std::abs(gp::eval_expr(gp::parse_expr(f.text), f.at) - f.expected));
  return fail_unless(worst <= 1e-9, fmt("%.0f fixtures, max error %.3g", static_cast<double>(fixtures.size()), worst));
}

Outcome cox_oracle() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution ev(0.75);
  std::uniform_int_distribution<std::size_t> size(10, 30);
  cox::FitOptions raw;
  raw.normalization = cox::Normalization::none;
  int done = 0, attempts = 0;
  double worst_beta = 0.0, worst_ties = 0.0;
  while (done < 20 && attempts < 200) {
    ++attempts;
    const std::size_t n = size(rng);
    std::vector<double> x(n), t(n);
    for (auto& v : x) v = nd(rng);
    std::iota(t.begin(), t.end(), 1.0);
    std::shuffle(t.begin(), t.end(), rng);
    Outcomes o;
    for (double ti : t) o.push_back({ti, ev(rng)});
    o[0].event = true;
    FeatureTable f;
    f.add_column("x", x);
    const std::vector<double> beta{nd(rng)};
    worst_ties = std::max(worst_ties, std::abs(cox::neg_log_partial_likelihood(beta, f, o, cox::Ties::efron) -
                                               cox::neg_log_partial_likelihood(beta, f, o, cox::Ties::breslow)));
    const auto root = score_root(x, o);
    if (!root) continue;  // monotone likelihood, no finite estimate
    worst_beta = std::max(worst_beta, std::abs(cox::fit_cox(f, o, raw).beta[0] - *root));
    ++done;
  }
  return fail_unless(done == 20 && worst_beta <= 1e-6 && worst_ties <= 1e-12,
                     fmt("%.0f instances, max |beta - root| %.3g, max |efron - breslow| %.3g", done, worst_beta,
                         worst_ties));
}

Outcome gradient_check() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> ti(1, 8);
  std::bernoulli_distribution ev(0.7);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 10 + rep, p = 1 + rep % 3;
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    Outcomes o;
    for (std::size_t i = 0; i < n; ++i) o.push_back({static_cast<double>(ti(rng)), ev(rng)});
    o[0].event = true;
    Eigen::VectorXd beta(p);
    for (Eigen::Index j = 0; j < beta.size(); ++j) beta[j] = 0.5 * nd(rng);
    const auto pl = cox::evaluate_partial_likelihood(beta, x, o, cox::Ties::efron);
    for (std::size_t j = 0; j < p; ++j) {
      const double h = 1e-5;
      Eigen::VectorXd up = beta, dn = beta;
      up[j] += h;
      dn[j] -= h;
      const double fd = (cox::evaluate_partial_likelihood(up, x, o, cox::Ties::efron).value -
                         cox::evaluate_partial_likelihood(dn, x, o, cox::Ties::efron).value) /
                        (2 * h);
      worst = std::max(worst, std::abs(pl.gradient[j] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return fail_unless(worst < 1e-6, fmt("max relative error %.3g", worst));
}

Outcome coefficient_recovery() {
  const std::vector<double> truth{0.5, -0.5};
  int within = 0, covered = 0, both = 0, reps_all = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    synth::SynthConfig c;
    c.n_subjects = 2000;
    c.beta_true = truth;
    c.censoring_target = 0.3;
    c.test_fraction = 0.0;
    c.rng_seed = seed;
    const auto d = synth::synth_survival(c);
    cox::FitOptions raw;
    raw.normalization = cox::Normalization::none;
    const auto fit = cox::fit_cox(d.covariates, d.outcomes, raw);
    bool all = true;
    for (std::size_t j = 0; j < 2; ++j) {
      const bool close = std::abs(fit.beta[j] - truth[j]) <= 0.1;
      const double lo = fit.beta[j] - 1.96 * fit.std_err[j], hi = fit.beta[j] + 1.96 * fit.std_err[j];
      const bool in_ci = lo <= truth[j] && truth[j] <= hi;
      within += close;
      covered += close && in_ci;
      all = all && close && in_ci;
    }
    both += all;
    ++reps_all;
  }
  // A replicate counts only when both coefficients pass both checks.
  std::ostringstream s;
  s << both << "/" << reps_all << " replicates with both coefficients within 0.1 and covered (" << within
    << "/100 within 0.1, " << covered << "/100 both checks)";
  return fail_unless(both >= 45, s.str());
}

Outcome km_logrank() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> size(1, 50);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_int_distribution<int> ui(1, 15);
  std::bernoulli_distribution ev(0.6);
  int mismatches = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Outcomes o;
    const auto n = size(rng);
    for (std::size_t i = 0; i < n; ++i) o.push_back({rep % 2 == 0 ? ui(rng) : u(rng), ev(rng)});
    const auto km = stats::kaplan_meier(o);
    const auto oracle = km_oracle(o);
    bool ok = km.steps() == oracle.size();
    std::size_t s = 0;
    for (auto it = oracle.begin(); ok && it != oracle.end(); ++it, ++s)
      ok = km.times[s] == it->first && std::abs(km.survival[s] - it->second) <= 1e-12;
    mismatches += !ok;
  }
  std::mt19937_64 rng2(2024);
  std::exponential_distribution<double> et(1.0 / 500.0), ct(1.0 / 1500.0);
  int rejections = 0;
  for (int r = 0; r < 1000; ++r) {
    Outcomes g[2];
    for (auto& grp : g)
      for (int i = 0; i < 200; ++i) {
        const double t = et(rng2), c = ct(rng2);
        grp.push_back({std::min(t, c), t <= c});
      }
    rejections += stats::logrank_two_sample(g[0], g[1]).p_value <= 0.05;
  }
  const double rate = rejections / 1000.0;
  return fail_unless(mismatches == 0 && rate >= 0.03 && rate <= 0.07,
                     fmt("%.0f KM mismatches in 100 cohorts, null rejection rate %.3f", mismatches, rate));
}

Outcome cindex_properties() {
  const auto o = make({1, 2, 3, 4, 5}, {true, true, true, true, true});
  const double perfect = metrics::concordance_index(std::vector<double>{5, 4, 3, 2, 1}, o);
  const double reversed = metrics::concordance_index(std::vector<double>{1, 2, 3, 4, 5}, o);
  const double tied = metrics::concordance_index(std::vector<double>{7, 7, 7, 7, 7}, o);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<std::size_t> size(2, 100);
  int mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto n = size(rng);
    std::vector<double> r(n);
    Outcomes oo;
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = std::round(nd(rng) * 4) / 4;
      oo.push_back({std::round(nd(rng) * 10), true});
    }
    const double expected = brute_cindex(r, oo);
    if (std::isnan(expected)) continue;
    mismatches += metrics::concordance_index(r, oo) != expected;
  }
  return fail_unless(perfect == 1.0 && reversed == 0.0 && tied == 0.5 && mismatches == 0,
                     fmt("perfect %.3g, reversed %.3g, ties %.3g", perfect, reversed, tied) +
                         fmt("; %.0f brute-force mismatches", mismatches));
}

Outcome gp_recovery() {
  struct Target {
    const char* name;
    std::vector<std::string> vars;
    std::function<double(const std::vector<double>&)> f;
  };
  const std::vector<Target> targets{
      {"add", {"x", "y"}, [](auto& v) { return v[0] + v[1]; }},
      {"sub", {"x", "y"}, [](auto& v) { return v[0] - v[1]; }},
      {"mul", {"x", "y"}, [](auto& v) { return v[0] * v[1]; }},
      {"div", {"x", "y"}, [](auto& v) { return v[0] / v[1]; }},
      {"lt", {"x", "y"}, [](auto& v) { return v[0] < v[1] ? 1.0 : 0.0; }},
      {"ge", {"x", "y"}, [](auto& v) { return v[0] >= v[1] ? 1.0 : 0.0; }},
      {"and", {"a", "b"}, [](auto& v) { return v[0] != 0 && v[1] != 0 ? 1.0 : 0.0; }},
      {"or", {"a", "b"}, [](auto& v) { return v[0] != 0 || v[1] != 0 ? 1.0 : 0.0; }},
      {"not", {"a", "b"}, [](auto& v) { return v[0] != 0 ? 0.0 : 1.0; }},
      {"if", {"a", "x", "y"}, [](auto& v) { return v[0] != 0 ? v[1] : v[2]; }},
  };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(1.0, 3.0);
  std::bernoulli_distribution coin(0.5);
  auto table_for = [&](const std::vector<std::string>& vars, std::size_t n) {
    FeatureTable t;
    for (const auto& v : vars) {
      std::vector<double> c(n);
      for (auto& x : c) x = (v == "a" || v == "b") ? (coin(rng) ? 1.0 : 0.0) : ux(rng);
      t.add_column(v, c);
    }
    return t;
  };
  auto recovered = [](const FeatureTable& data, const std::vector<double>& y, std::uint64_t seed) {
    gp::GpConfig c;
    c.depth = 2;
    c.rng_seed = seed;
    return gp::run_ims(c, data, y, data, y).train_mse < 1e-8;
  };
  std::ostringstream s;
  bool ok = true;
  for (const auto& t : targets) {
    const auto data = table_for(t.vars, 200);
    std::vector<double> y(data.rows());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = t.f(data.row(i));
    const auto t0 = std::chrono::steady_clock::now();
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) hits += recovered(data, y, seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && hits >= 1 && secs < 120.0;
    s << t.name << " " << hits << "/5 " << std::lround(secs) << "s, ";
  }
  const auto data = table_for({"x", "y"}, 200);
  std::vector<double> y(data.column(0).begin(), data.column(0).end());
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) hits += recovered(data, y, seed);
  s << "identity " << hits << "/5";
  return fail_unless(ok && hits >= 3, s.str());
}

Outcome stratification_end_to_end(const fs::path& work) {
  synth::SynthConfig c;
  c.n_subjects = 1800;
  c.strata = 6;
  c.strata_hazard_ratio = 2.0;
  c.censoring_target = 0.3;
  c.test_fraction = 0.3;
  c.rng_seed = 21;
  synth::write_synth(synth::synth_survival(c), c, work / "six");
  pipeline::PipelineConfig cfg;
  cfg.manifest = work / "six" / "manifest.json";
  cfg.seed = 5;
  cfg.tree_baseline = false;
  const auto b = pipeline::run_pipeline(cfg);
  if (!b.ok()) return {false, b.failure->describe()};
  const auto& g = *b.train_groups;
  const auto* ci = b.metric("cindex_group");
  const std::size_t tests = g.pairwise ? g.pairwise->n_tests : 0;
  std::ostringstream s;
  s << "groups " << g.n_groups << ", " << tests << " pairwise tests all significant " << (g.all_distinct ? "yes" : "no")
    << ", test group C-index " << (ci ? ci->result.point : NAN) << ", decision-list agreement "
    << b.decision_agreement;
  return fail_unless(g.n_groups == 6 && tests == 15 && g.all_distinct && ci && ci->result.point > 0.70 &&
                         b.decision_agreement >= 0.90,
                     s.str());
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

Outcome determinism(const fs::path& work, const std::string& cli) {
  const auto dir = work / "det";
  fs::create_directories(dir);
  synth::SynthConfig c;
  c.n_subjects = 600;
  c.covariates = {{"age", synth::Distribution::uniform, 0.0, 1.0},
                  {"T", synth::Distribution::uniform, 1.0, 4.0},
                  {"smoking", synth::Distribution::bernoulli, 0.4, 0.0}};
  c.beta_true = {0.8, 0.4, 0.3};
  c.teachers = {{"f1", "0.2 * T + age", 0.02}, {"f2", "If(smoking < 0.5) Then(0.3) Else(0.6)", 0.02}};
  c.rng_seed = 8;
  {
    std::ofstream os(dir / "synth.json");
    os << synth::config_to_json(c).dump(2);
  }
  json pc = {{"seed", 3},
             {"distill", {{"enabled", true}, {"depths", {2, 3}}, {"seeds", 2}, {"generations", 64}}},
             {"metrics", {{"n_bootstrap", 300}}}};
  {
    std::ofstream os(dir / "pipeline.json");
    os << pc.dump(2);
  }
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > \"" + (dir / "log.txt").string() + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  if (run("synth --config \"" + (dir / "synth.json").string() + "\" --out \"" + (dir / "data").string() + "\"") != 0)
    return {false, "synth subcommand failed"};
  const std::string common = "pipeline --manifest \"" + (dir / "data" / "manifest.json").string() + "\" --config \"" +
                             (dir / "pipeline.json").string() + "\" --seed 3";
  if (run(common + " --threads 1 --out \"" + (dir / "a").string() + "\"") != 0) return {false, "run 1 failed"};
  if (run(common + " --threads 4 --out \"" + (dir / "b").string() + "\"") != 0) return {false, "run 2 failed"};
  const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      if (first.empty()) first = name;
      ++differing;
    }
  }
  std::ostringstream s;
  s << a.size() << " files compared across --threads 1 and 4, " << differing << " differ";
  if (!first.empty()) s << " (first: " << first << ")";
  return fail_unless(!a.empty() && a.size() == b.size() && differing == 0 && a.count("report.json"), s.str());
}

Outcome bootstrap_contract() {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<double> r(80);
  Outcomes o;
  for (auto& v : r) {
    v = nd(rng);
    o.push_back({std::round(std::exp(-v) * 100 + 1), rng() % 3 != 0});
  }
  const metrics::MetricFn cidx = [](std::span<const double> x, std::span<const SurvivalOutcome> y) {
    return metrics::concordance_index(x, y);
  };
  const auto a = metrics::bootstrap_ci(cidx, r, o, 1000, 0.95, 42), b = metrics::bootstrap_ci(cidx, r, o, 1000, 0.95, 42);
  const bool reproducible = a.point == b.point && a.ci_lower == b.ci_lower && a.ci_upper == b.ci_upper;

  const metrics::MetricFn constant = [](std::span<const double>, std::span<const SurvivalOutcome>) { return 0.7; };
  const auto k = metrics::bootstrap_ci(constant, r, o, 1000, 0.95, 1);
  const bool degenerate = k.ci_lower == k.point && k.ci_upper == k.point;

  const metrics::MetricFn mean = [](std::span<const double> x, std::span<const SurvivalOutcome>) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  };
  const auto m = metrics::bootstrap_ci(mean, r, o, 1000, 0.95, 3);
  std::vector<double> vals;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto idx = metrics::resample_indices(r.size(), 3, i);
    double s = 0;
    for (auto j : idx) s += r[j];
    vals.push_back(s / static_cast<double>(idx.size()));
  }
  std::sort(vals.begin(), vals.end());
  const bool order_stats = m.ci_lower == vals[24] && m.ci_upper == vals[974];
  std::ostringstream s;
  s << "reproducible " << reproducible << ", degenerate " << degenerate << ", order statistics 25/975 " << order_stats;
  return fail_unless(reproducible && degenerate && order_stats, s.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string cli;
  std::string work = (fs::temp_directory_path() / "isurv_acceptance").string();
  app.add_option("--cli", cli, "path to the isurv executable")->required();
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(work);
  fs::create_directories(work);

  criterion("expression fixtures", 1, expression_fixtures);
  criterion("cox oracle equivalence", 10, cox_oracle);
  criterion("gradient check", 10, gradient_check);
  criterion("coefficient recovery", 60, coefficient_recovery);
  criterion("km/log-rank oracles", 60, km_logrank);
  criterion("c-index properties", 5, cindex_properties);
  criterion("gp recovery", 11 * 120, gp_recovery);
  criterion("stratification end to end", 60, [&] { return stratification_end_to_end(work); });
  criterion("determinism", 120, [&] { return determinism(work, cli); });
  criterion("bootstrap contract", 10, bootstrap_contract);
  return failures == 0 ? 0 : 1;
}

#include "isurv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "isurv/dataset.hpp"
#include "isurv/random.hpp"

namespace isurv::synth {

using nlohmann::json;

void SynthConfig::validate() const {
  if (n_subjects < 2) throw Error("n_subjects must be at least 2");
  if (!(weibull_shape > 0.0) || !(weibull_scale > 0.0)) throw Error("Weibull shape and scale must be positive");
  if (!(censoring_target >= 0.0 && censoring_target <= 0.9)) throw Error("censoring target must lie in [0, 0.9]");
  if (!covariates.empty() && covariates.size() != beta_true.size())
    throw Error("beta_true needs one coefficient per covariate");
  if (strata > 1 && !(strata_hazard_ratio > 0.0)) throw Error("strata hazard ratio must be positive");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw Error("test_fraction must lie in [0, 1)");
  for (const auto& c : covariates) {
    if (c.dist == Distribution::bernoulli && !(c.a >= 0.0 && c.a <= 1.0))
      throw Error("bernoulli p for '" + c.name + "' must lie in [0, 1]");
    if (c.dist == Distribution::uniform && !(c.b > c.a)) throw Error("empty uniform range for '" + c.name + "'");
    if (c.dist == Distribution::normal && !(c.b >= 0.0)) throw Error("negative sd for '" + c.name + "'");
  }
}

namespace {

const char* dist_name(Distribution d) {
  switch (d) {
    case Distribution::uniform: return "uniform";
    case Distribution::normal: return "normal";
    case Distribution::bernoulli: return "bernoulli";
  }
  return "normal";
}

Distribution dist_from(const std::string& s) {
  if (s == "uniform") return Distribution::uniform;
  if (s == "normal") return Distribution::normal;
  if (s == "bernoulli") return Distribution::bernoulli;
  throw Error("unknown distribution '" + s + "'");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw Error("unknown key '" + it.key() + "' in " + where);
}

std::vector<CovariateSpec> effective_covariates(const SynthConfig& c) {
  if (!c.covariates.empty()) return c.covariates;
  std::vector<CovariateSpec> out;
  for (std::size_t j = 0; j < c.beta_true.size(); ++j) out.push_back({"x" + std::to_string(j + 1)});
  return out;
}

double censored_fraction(std::span<const double> event_times, std::span<const double> unit_exp, double hazard) {
  if (hazard <= 0.0) return 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < event_times.size(); ++i)
    if (unit_exp[i] / hazard < event_times[i]) ++c;
  return static_cast<double>(c) / static_cast<double>(event_times.size());
}

}  // namespace

SynthConfig config_from_json(const json& j) {
  check_keys(j, {"n_subjects", "weibull_shape", "weibull_scale", "beta_true", "covariates", "censoring_target",
                 "strata", "strata_hazard_ratio", "test_fraction", "teachers", "rng_seed"},
             "synth config");
  SynthConfig c;
  try {
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.weibull_shape = j.value("weibull_shape", c.weibull_shape);
    c.weibull_scale = j.value("weibull_scale", c.weibull_scale);
    c.beta_true = j.value("beta_true", c.beta_true);
    for (const auto& cv : j.value("covariates", json::array())) {
      check_keys(cv, {"name", "dist", "a", "b"}, "covariate spec");
      CovariateSpec s;
      s.name = cv.at("name").get<std::string>();
      s.dist = dist_from(cv.value("dist", std::string("normal")));
      s.a = cv.value("a", s.dist == Distribution::bernoulli ? 0.5 : 0.0);
      s.b = cv.value("b", 1.0);
      c.covariates.push_back(s);
    }
    c.censoring_target = j.value("censoring_target", c.censoring_target);
    c.strata = j.value("strata", c.strata);
    c.strata_hazard_ratio = j.value("strata_hazard_ratio", c.strata_hazard_ratio);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    for (const auto& t : j.value("teachers", json::array())) {
      check_keys(t, {"name", "expression", "noise_sd"}, "teacher spec");
      c.teachers.push_back({t.at("name").get<std::string>(), t.at("expression").get<std::string>(),
                            t.value("noise_sd", 0.0)});
    }
    c.rng_seed = j.value("rng_seed", c.rng_seed);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid synth config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const SynthConfig& c) {
  json j{{"n_subjects", c.n_subjects},       {"weibull_shape", c.weibull_shape},
         {"weibull_scale", c.weibull_scale}, {"beta_true", c.beta_true},
         {"censoring_target", c.censoring_target}, {"strata", c.strata},
         {"strata_hazard_ratio", c.strata_hazard_ratio}, {"test_fraction", c.test_fraction},
         {"rng_seed", c.rng_seed}};
  j["covariates"] = json::array();
  for (const auto& s : c.covariates) j["covariates"].push_back({{"name", s.name}, {"dist", dist_name(s.dist)}, {"a", s.a}, {"b", s.b}});
  j["teachers"] = json::array();
  for (const auto& t : c.teachers)
    j["teachers"].push_back({{"name", t.name}, {"expression", t.expression}, {"noise_sd", t.noise_sd}});
  return j;
}

SynthData synth_survival(const SynthConfig& config) {
  config.validate();
  const std::size_t n = config.n_subjects;
  const auto specs = effective_covariates(config);
  SynthData out;
  out.covariates = FeatureTable(n);

  std::vector<double> eta(n, 0.0);
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto& s = specs[j];
    Rng rng = make_rng(config.rng_seed, {1, j});
    std::vector<double> col(n);
    std::uniform_real_distribution<double> uni(s.a, s.b);
    std::normal_distribution<double> norm(s.a, s.b);
    std::bernoulli_distribution bern(s.dist == Distribution::bernoulli ? s.a : 0.5);
    for (auto& v : col) {
      switch (s.dist) {
        case Distribution::uniform: v = uni(rng); break;
        case Distribution::normal: v = norm(rng); break;
        case Distribution::bernoulli: v = bern(rng) ? 1.0 : 0.0; break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) eta[i] += config.beta_true[j] * col[i];
    out.covariates.add_column(s.name, std::move(col));
  }
  if (config.strata > 1) {
    const double step = std::log(config.strata_hazard_ratio);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = static_cast<int>(i * config.strata / n);
      out.strata.push_back(s + 1);
      col[i] = s + 1;
      eta[i] += s * step;
    }
    out.covariates.add_column("stratum", std::move(col));
  }
  out.true_risk = eta;

  // Weibull PH: S(t | x) = exp(-(t/scale)^shape * exp(eta)).
  std::vector<double> event_time(n), unit_exp(n);
  {
    Rng rng = make_rng(config.rng_seed, {2});
    std::exponential_distribution<double> e1(1.0);
    for (std::size_t i = 0; i < n; ++i)
      event_time[i] = config.weibull_scale * std::pow(e1(rng) / std::exp(eta[i]), 1.0 / config.weibull_shape);
    Rng crng = make_rng(config.rng_seed, {3});
    for (auto& u : unit_exp) u = e1(crng);
  }

  // Exponential censoring; the hazard is bisected on the realized sample.
  double hazard = 0.0;
  if (config.censoring_target > 0.0) {
    double lo = 1e-12, hi = 1.0;
    while (censored_fraction(event_time, unit_exp, hi) < config.censoring_target && hi < 1e12) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (censored_fraction(event_time, unit_exp, mid) < config.censoring_target)
        lo = mid;
      else
        hi = mid;
    }
    const double flo = censored_fraction(event_time, unit_exp, lo);
    const double fhi = censored_fraction(event_time, unit_exp, hi);
    hazard = std::abs(flo - config.censoring_target) <= std::abs(fhi - config.censoring_target) ? lo : hi;
  }
  out.censoring_hazard = hazard;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = hazard > 0.0 ? unit_exp[i] / hazard : INFINITY;
    const bool event = event_time[i] <= c;
    out.outcomes.push_back({event ? event_time[i] : c, event});
    censored += event ? 0 : 1;
  }
  out.censoring_rate = static_cast<double>(censored) / static_cast<double>(n);
  if (std::abs(out.censoring_rate - config.censoring_target) > 0.05)
    throw Error("infeasible censoring target " + data::format_double(config.censoring_target) +
                " (reached " + data::format_double(out.censoring_rate) + ")");

  out.is_test.assign(n, false);
  {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(config.rng_seed, {4});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < n_test; ++i) out.is_test[perm[i]] = true;
  }

  out.teachers = FeatureTable(n);
  for (std::size_t k = 0; k < config.teachers.size(); ++k) {
    const auto& t = config.teachers[k];
    const gp::ExprTree tree = gp::parse_expr(t.expression, out.covariates.names());
    out.teachers.add_column(t.name, synth_teacher(tree, out.covariates, t.noise_sd, stream_seed(config.rng_seed, {5, k})));
  }
  return out;
}

void write_synth(const SynthData& d, const SynthConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t n = d.outcomes.size();
  {
    std::ofstream os(dir / "data.csv", std::ios::binary);
    if (!os) throw Error("cannot write " + (dir / "data.csv").string());
    std::vector<std::string> header{"id", "time", "event"};
    for (const auto& name : d.covariates.names()) header.push_back(name);
    for (const auto& name : d.teachers.names()) header.push_back(name);
    header.push_back("split");
    data::write_csv_row(os, header);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> row{std::to_string(i + 1), data::format_double(d.outcomes[i].time),
                                   d.outcomes[i].event ? "1" : "0"};
      for (std::size_t j = 0; j < d.covariates.cols(); ++j) row.push_back(data::format_double(d.covariates.at(i, j)));
      for (std::size_t j = 0; j < d.teachers.cols(); ++j) row.push_back(data::format_double(d.teachers.at(i, j)));
      row.push_back(d.is_test[i] ? "test" : "train");
      data::write_csv_row(os, row);
    }
  }
  {
    json truth{{"beta_true", config.beta_true},
               {"covariates", d.covariates.names()},
               {"true_risk", d.true_risk},
               {"censoring_rate", d.censoring_rate},
               {"censoring_hazard", d.censoring_hazard},
               {"config", config_to_json(config)}};
    if (!d.strata.empty()) truth["strata"] = d.strata;
    std::ofstream os(dir / "truth.json");
    os << truth.dump(2) << '\n';
  }
  {
    data::DatasetManifest m;
    m.csv_path = "data.csv";
    for (const auto& name : d.covariates.names()) {
      data::FeatureSpec f;
      f.name = name;
      f.kind = name == "stratum" ? data::ColumnKind::ordinal : data::ColumnKind::numeric;
      m.features.push_back(f);
    }
    m.teacher_columns = d.teachers.names();
    m.split_column = "split";
    std::ofstream os(dir / "manifest.json");
    os << data::manifest_to_json(m).dump(2) << '\n';
  }
}

std::vector<double> synth_teacher(const gp::ExprTree& expression, const FeatureTable& data, double noise_sd,
                                  std::uint64_t seed) {
  if (!(noise_sd >= 0.0)) throw Error("noise_sd must be non-negative");
  std::vector<double> out(data.rows());
  gp::Row row;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) row[data.names()[j]] = data.at(i, j);
    out[i] = gp::eval_expr(expression, row);
  }
  if (noise_sd > 0.0) {
    Rng rng = make_rng(seed, {0x7EA});
    std::normal_distribution<double> noise(0.0, noise_sd);
    for (auto& v : out) v += noise(rng);
  }
  return out;
}

}  // namespace isurv::synth

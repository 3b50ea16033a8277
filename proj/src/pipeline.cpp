#include "isurv/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <boost/version.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

#include "isurv/random.hpp"

namespace isurv::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

// --- configuration -------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw Error("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

cox::Normalization normalization_from(const std::string& s) {
  if (s == "zscore") return cox::Normalization::zscore;
  if (s == "minmax") return cox::Normalization::minmax;
  if (s == "none") return cox::Normalization::none;
  throw Error("unknown normalization '" + s + "'");
}

const char* normalization_name(cox::Normalization n) {
  switch (n) {
    case cox::Normalization::zscore: return "zscore";
    case cox::Normalization::minmax: return "minmax";
    case cox::Normalization::none: return "none";
  }
  return "zscore";
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, {"manifest", "seed", "distill", "cox", "stratify", "svm", "metrics"}, "pipeline config");
  PipelineConfig c;
  try {
    if (j.contains("manifest")) {
      const fs::path m = j.at("manifest").get<std::string>();
      c.manifest = m.is_relative() && !base_dir.empty() ? base_dir / m : m;
    }
    read(j, "seed", c.seed);
    if (j.contains("distill")) {
      const auto& d = j.at("distill");
      check_keys(d, {"enabled", "depths", "seeds", "generations", "base_population", "teachers", "inputs", "depth"},
                 "distill");
      read(d, "enabled", c.distill.enabled);
      read(d, "depths", c.distill.depths);
      read(d, "seeds", c.distill.seeds);
      read(d, "generations", c.distill.generations);
      read(d, "base_population", c.distill.base_population);
      read(d, "teachers", c.distill.teachers);
      read(d, "inputs", c.distill.inputs);
      if (d.contains("depth") && !d.at("depth").is_null()) c.distill.depth = d.at("depth").get<int>();
    }
    if (j.contains("cox")) {
      const auto& x = j.at("cox");
      check_keys(x, {"normalization", "prune_alpha", "columns"}, "cox");
      if (x.contains("normalization")) c.normalization = normalization_from(x.at("normalization").get<std::string>());
      read(x, "prune_alpha", c.prune_alpha);
      read(x, "columns", c.cox_columns);
    }
    if (j.contains("stratify")) {
      const auto& s = j.at("stratify");
      check_keys(s, {"alpha", "n_max", "pairs", "tnm_baseline", "tree_baseline", "tree"}, "stratify");
      read(s, "alpha", c.strat_alpha);
      read(s, "n_max", c.n_max);
      if (s.contains("pairs")) {
        const auto p = s.at("pairs").get<std::string>();
        if (p == "all")
          c.pair_mode = stats::PairMode::all;
        else if (p == "consecutive")
          c.pair_mode = stats::PairMode::consecutive;
        else
          throw Error("unknown pairs mode '" + p + "'");
      }
      read(s, "tnm_baseline", c.tnm_baseline);
      read(s, "tree_baseline", c.tree_baseline);
      if (s.contains("tree")) {
        const auto& t = s.at("tree");
        check_keys(t, {"min_leaf", "max_leaves", "split_alpha"}, "stratify.tree");
        read(t, "min_leaf", c.tree.min_leaf);
        read(t, "max_leaves", c.tree.max_leaves);
        read(t, "split_alpha", c.tree.split_alpha);
      }
    }
    if (j.contains("svm")) {
      const auto& s = j.at("svm");
      check_keys(s, {"c", "max_iterations", "tolerance"}, "svm");
      read(s, "c", c.svm.c);
      read(s, "max_iterations", c.svm.max_iterations);
      read(s, "tolerance", c.svm.tolerance);
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      check_keys(m, {"horizon_days", "n_bootstrap", "level"}, "metrics");
      read(m, "horizon_days", c.horizon);
      read(m, "n_bootstrap", c.n_bootstrap);
      read(m, "level", c.level);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("invalid pipeline config: ") + e.what());
  }
  if (c.distill.seeds < 1 || c.distill.generations < 1 || c.distill.base_population < 1)
    throw Error("distill seeds, generations and base_population must be positive");
  for (int d : c.distill.depths)
    if (d < 2 || d > 4) throw Error("distill depth out of range: " + std::to_string(d));
  if (!(c.prune_alpha > 0.0 && c.prune_alpha < 1.0)) throw Error("prune_alpha must lie in (0, 1)");
  if (!(c.strat_alpha > 0.0 && c.strat_alpha < 1.0)) throw Error("stratify alpha must lie in (0, 1)");
  if (c.n_max < 2) throw Error("n_max must be at least 2");
  if (!(c.svm.c > 0.0)) throw Error("svm c must be positive");
  if (!(c.level > 0.0 && c.level < 1.0)) throw Error("metrics level must lie in (0, 1)");
  if (!(c.horizon > 0.0)) throw Error("horizon_days must be positive");
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json d{{"enabled", c.distill.enabled},
         {"depths", c.distill.depths},
         {"seeds", c.distill.seeds},
         {"generations", c.distill.generations},
         {"base_population", c.distill.base_population},
         {"teachers", c.distill.teachers},
         {"inputs", c.distill.inputs},
         {"depth", c.distill.depth ? json(*c.distill.depth) : json(nullptr)}};
  return json{
      {"manifest", c.manifest.string()},
      {"seed", c.seed},
      {"distill", d},
      {"cox", {{"normalization", normalization_name(c.normalization)}, {"prune_alpha", c.prune_alpha}, {"columns", c.cox_columns}}},
      {"stratify",
       {{"alpha", c.strat_alpha},
        {"n_max", c.n_max},
        {"pairs", c.pair_mode == stats::PairMode::all ? "all" : "consecutive"},
        {"tnm_baseline", c.tnm_baseline},
        {"tree_baseline", c.tree_baseline},
        {"tree", {{"min_leaf", c.tree.min_leaf}, {"max_leaves", c.tree.max_leaves}, {"split_alpha", c.tree.split_alpha}}}}},
      {"svm", {{"c", c.svm.c}, {"max_iterations", c.svm.max_iterations}, {"tolerance", c.svm.tolerance}}},
      {"metrics", {{"horizon_days", c.horizon}, {"n_bootstrap", c.n_bootstrap}, {"level", c.level}}},
  };
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::distill: return "distill";
    case Stage::assemble: return "assemble";
    case Stage::standardize: return "standardize";
    case Stage::fit_cox: return "fit_cox";
    case Stage::prune_refit: return "prune_refit";
    case Stage::predict_risk: return "predict_risk";
    case Stage::select_groups: return "select_group_count";
    case Stage::boundaries: return "boundaries";
    case Stage::metrics: return "metrics";
    case Stage::emit: return "emit";
  }
  return "?";
}

std::string StageFailure::describe() const {
  return "stage " + std::to_string(static_cast<int>(stage)) + " (" + stage_name(stage) + "): " + message;
}

const MetricRow* ReportBundle::metric(std::string_view name) const {
  for (const auto& m : metrics)
    if (m.name == name) return &m;
  return nullptr;
}

// --- serialization -------------------------------------------------------

namespace {

json to_json(const cox::CoxFit& f) {
  json rows = json::array();
  for (std::size_t j = 0; j < f.size(); ++j)
    rows.push_back({{"name", f.feature_names[j]},
                    {"beta", f.beta[j]},
                    {"std_err", f.std_err[j]},
                    {"hazard_ratio", f.hazard_ratio[j]},
                    {"ci_lower", f.hr_ci_lower[j]},
                    {"ci_upper", f.hr_ci_upper[j]},
                    {"p_value", f.p_value[j]},
                    {"effect", cox::to_string(f.effect(j))}});
  return {{"coefficients", rows},
          {"neg_log_partial_likelihood", f.log_likelihood},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"warnings", f.warnings}};
}

json to_json(const cox::NormParams& n) {
  json cols = json::array();
  for (const auto& p : n.params) cols.push_back({{"name", p.name}, {"center", p.center}, {"scale", p.scale}});
  return {{"mode", normalization_name(n.mode)}, {"columns", cols}};
}

json to_json(const stats::KmCurve& k) {
  return {{"time", k.times},         {"survival", k.survival}, {"ci_lower", k.ci_lower},
          {"ci_upper", k.ci_upper},  {"n_at_risk", k.n_at_risk}, {"n_events", k.n_events}};
}

json to_json(const metrics::MetricResult& m) {
  return {{"point", m.point},         {"ci_lower", m.ci_lower},         {"ci_upper", m.ci_upper},
          {"level", m.level},         {"n_bootstrap", m.n_bootstrap}, {"n_degenerate", m.n_degenerate},
          {"seed", m.seed}};
}

json to_json(const stratify::StratificationResult& r) {
  json j{{"n_groups", r.n_groups},
         {"significant", r.significant},
         {"all_distinct", r.all_distinct},
         {"corrected_alpha", r.corrected_alpha},
         {"group_sizes", r.group_sizes},
         {"cut_points", r.cut_points}};
  j["km"] = json::array();
  for (const auto& k : r.km_per_group) j["km"].push_back(to_json(k));
  if (r.pairwise) {
    j["pairwise"] = {{"mode", r.pairwise->mode == stats::PairMode::all ? "all" : "consecutive"},
                     {"n_tests", r.pairwise->n_tests},
                     {"statistic", r.pairwise->statistic},
                     {"p_value", r.pairwise->p_value}};
  }
  j["candidates"] = json::array();
  for (const auto& c : r.candidates)
    j["candidates"].push_back(
        {{"n_groups", c.n_groups},
         {"all_distinct", c.all_distinct},
         {"degenerate", c.degenerate},
         {"tied_boundary", c.tied_boundary},
         {"max_p", c.max_p}});
  if (r.group_cindex) j["group_cindex"] = to_json(*r.group_cindex);
  if (r.group_auc) j["group_auc"] = to_json(*r.group_auc);
  return j;
}

json to_json(const stratify::BoundaryHyperplane& b) {
  return {{"k", b.boundary_index},          {"features", b.feature_names}, {"weights", b.weights},
          {"intercept", b.intercept},       {"test_auroc", b.test_auroc},  {"std_weights", b.std_weights},
          {"std_intercept", b.std_intercept}};
}

json to_json(const gp::DistillResult& r) {
  return {{"depth", r.depth},
          {"seed", r.seed},
          {"expression", gp::format_expr(r.expression)},
          {"expression_exact", gp::format_expr(r.expression, {17})},
          {"train_mse", r.train_mse},
          {"test_mse", r.test_mse},
          {"evaluations", r.evaluations},
          {"generations", r.generations}};
}

json to_json(const DistilledFeature& d) {
  json runs = json::array();
  for (const auto& r : d.report.runs) runs.push_back(to_json(r));
  return {{"teacher", d.teacher}, {"chosen_depth", d.chosen_depth}, {"runs", runs}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error("failed writing " + path.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

using data::format_double;
using data::write_csv_row;

void write_id_values(const fs::path& path, const std::vector<std::string>& header,
                     const std::vector<std::string>& train_ids, const std::vector<std::string>& test_ids,
                     const std::vector<std::vector<double>>& train_cols,
                     const std::vector<std::vector<double>>& test_cols) {
  auto os = open_out(path);
  write_csv_row(os, header);
  auto dump = [&](const std::vector<std::string>& ids, const std::vector<std::vector<double>>& cols, const char* split) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::vector<std::string> row{ids[i], split};
      for (const auto& c : cols) row.push_back(format_double(c[i]));
      write_csv_row(os, row);
    }
  };
  dump(train_ids, train_cols, "train");
  dump(test_ids, test_cols, "test");
}

std::vector<std::vector<double>> columns_of(const FeatureTable& t) {
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < t.cols(); ++j) out.emplace_back(t.column(j).begin(), t.column(j).end());
  return out;
}

std::vector<double> as_double(std::span<const int> v) { return {v.begin(), v.end()}; }

}  // namespace

// --- orchestration -------------------------------------------------------

namespace {

class StageRunner {
 public:
  StageRunner(ReportBundle& bundle, const RunOptions& options) : bundle_(bundle), options_(options) {
    if (options_.out_dir) {
      stage_dir_ = *options_.out_dir / "stages";
      fs::create_directories(stage_dir_);
    }
  }

  // Returns false once the run must stop (failure or last stage reached).
  template <typename F>
  bool run(Stage stage, F&& body) {
    if (stopped_) return false;
    try {
      body();
      bundle_.completed_stage = static_cast<int>(stage);
    } catch (const std::exception& e) {
      bundle_.failure = StageFailure{stage, e.what()};
      stopped_ = true;
      return false;
    }
    if (stage == options_.last_stage) stopped_ = true;
    return true;
  }

  bool persist() const { return !stage_dir_.empty(); }
  fs::path path(const std::string& name) const { return stage_dir_ / name; }

 private:
  ReportBundle& bundle_;
  const RunOptions& options_;
  fs::path stage_dir_;
  bool stopped_ = false;
};

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

}  // namespace

ReportBundle run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  ReportBundle b;
  data::DatasetManifest manifest;
  data::Dataset ds;
  try {
    manifest = data::load_manifest(config.manifest);
    ds = data::load_dataset(manifest);
  } catch (const std::exception& e) {
    b.failure = StageFailure{Stage::distill, std::string("loading data: ") + e.what()};
    return b;
  }

  {
    auto mj = data::manifest_to_json(manifest);
    mj["csv_path"] = manifest.csv_path.filename().string();
    auto cj = config_to_json(config);
    cj["manifest"] = hex64(fnv1a64(mj.dump()));
    b.provenance = {{"tool", "isurv"},
                    {"version", kVersion},
                    {"seed", config.seed},
                    {"config_hash", hex64(fnv1a64(cj.dump()))},
                    {"manifest_hash", hex64(fnv1a64(mj.dump()))},
                    {"data_hash", file_hash(manifest.csv_path)},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000)},
                    {"config", cj}};
  }
  b.rows_in = ds.rows_in;
  b.rows_used = ds.rows_used;
  b.rows_dropped_missing = ds.rows_dropped_missing;

  const auto train_rows = ds.train_rows();
  const auto test_rows = ds.test_rows();
  b.n_train = train_rows.size();
  b.n_test = test_rows.size();
  const Outcomes train_out = gather<SurvivalOutcome>(ds.outcomes, train_rows);
  const Outcomes test_out = gather<SurvivalOutcome>(ds.outcomes, test_rows);
  b.train_ids = gather<std::string>(ds.ids, train_rows);
  b.test_ids = gather<std::string>(ds.ids, test_rows);

  StageRunner runner(b, options);
  FeatureTable teachers = ds.teachers;  // all rows, distilled columns replaced
  FeatureTable assembled, std_all, std_train, std_test;

  runner.run(Stage::distill, [&] {
    if (!config.distill.enabled) return;
    if (train_rows.empty() || test_rows.empty()) throw Error("distillation needs train and test rows");
    std::vector<std::string> targets = config.distill.teachers;
    if (targets.empty()) targets = ds.teachers.names();
    std::vector<std::string> inputs = config.distill.inputs;
    if (inputs.empty()) inputs = ds.features.names();
    if (inputs.empty()) throw Error("no input features for distillation");
    const FeatureTable in_all = ds.features.select_columns(inputs);
    const FeatureTable in_train = in_all.select_rows(train_rows);
    const FeatureTable in_test = in_all.select_rows(test_rows);

    FeatureTable replaced(ds.rows_used);
    for (const auto& name : ds.teachers.names()) {
      const auto col = ds.teachers.column(name);
      if (std::find(targets.begin(), targets.end(), name) == targets.end()) {
        replaced.add_column(name, {col.begin(), col.end()});
        continue;
      }
      gp::GpConfig gc;
      gc.generations = config.distill.generations;
      gc.base_population = config.distill.base_population;
      gc.seeds = config.distill.seeds;
      gc.rng_seed = stream_seed(config.seed, {0xD157, ds.teachers.index_of(name)});
      const auto y_train = gather<double>(col, train_rows);
      const auto y_test = gather<double>(col, test_rows);
      DistilledFeature df{name, 0, gp::distill_feature(in_train, y_train, in_test, y_test, gc, config.distill.depths)};
      if (config.distill.depth) {
        df.chosen_depth = *config.distill.depth;
        df.report.best_for_depth(df.chosen_depth);  // throws when the depth was not searched
      } else {
        double best = INFINITY;
        for (int d : df.report.depths) {
          const double m = df.report.best_for_depth(d).test_mse;
          if (m < best) {
            best = m;
            df.chosen_depth = d;
          }
        }
        if (df.chosen_depth == 0) df.chosen_depth = df.report.depths.front();
      }
      replaced.add_column(name, gp::evaluate(df.report.best_for_depth(df.chosen_depth).expression, in_all));
      b.distillation.push_back(std::move(df));
    }
    for (const auto& t : targets)
      if (!ds.teachers.find(t)) throw Error("unknown teacher column '" + t + "'");
    teachers = std::move(replaced);
    if (runner.persist()) {
      json j = json::array();
      for (const auto& d : b.distillation) j.push_back(to_json(d));
      write_json(runner.path("01_distill.json"), j);
    }
  });

  runner.run(Stage::assemble, [&] {
    std::vector<std::string> cols = config.cox_columns;
    if (cols.empty()) cols = teachers.cols() > 0 ? teachers.names() : ds.features.names();
    if (cols.empty()) throw Error("no teacher or feature columns");
    assembled = FeatureTable(ds.rows_used);
    for (const auto& c : cols) {
      std::span<const double> src;
      if (teachers.find(c))
        src = teachers.column(c);
      else if (ds.features.find(c))
        src = ds.features.column(c);
      else
        throw Error("missing feature column '" + c + "'");
      assembled.add_column(c, {src.begin(), src.end()});
    }
    b.feature_names = assembled.names();
    if (runner.persist()) {
      const auto tr = assembled.select_rows(train_rows), te = assembled.select_rows(test_rows);
      std::vector<std::string> header{"id", "split"};
      header.insert(header.end(), cols.begin(), cols.end());
      write_id_values(runner.path("02_features.csv"), header, b.train_ids, b.test_ids, columns_of(tr), columns_of(te));
    }
  });

  runner.run(Stage::standardize, [&] {
    if (train_rows.empty()) throw Error("no training rows");
    auto [scaled_train, params] = cox::standardize(assembled.select_rows(train_rows), config.normalization);
    b.standardization = params;
    std_all = params.apply(assembled);
    std_train = std_all.select_rows(train_rows);
    std_test = std_all.select_rows(test_rows);
    if (runner.persist()) write_json(runner.path("03_standardization.json"), to_json(params));
  });

  cox::FitOptions fo;
  fo.normalization = cox::Normalization::none;
  const bool external_risks = options.risks.has_value();

  runner.run(Stage::fit_cox, [&] {
    if (external_risks) return;
    b.initial_fit = cox::fit_cox(std_train, train_out, fo);
    if (runner.persist()) write_json(runner.path("04_cox_initial.json"), to_json(*b.initial_fit));
  });

  runner.run(Stage::prune_refit, [&] {
    if (external_risks) return;
    b.final_fit = cox::prune_refit(*b.initial_fit, std_train, train_out, config.prune_alpha);
    if (runner.persist()) write_json(runner.path("05_cox_final.json"), to_json(*b.final_fit));
  });

  runner.run(Stage::predict_risk, [&] {
    if (external_risks) {
      auto lookup = [&](const std::vector<std::string>& ids) {
        std::vector<double> r;
        for (const auto& id : ids) {
          auto it = options.risks->find(id);
          if (it == options.risks->end()) throw Error("no risk for subject '" + id + "'");
          r.push_back(it->second);
        }
        return r;
      };
      b.train_risk = lookup(b.train_ids);
      b.test_risk = lookup(b.test_ids);
      b.train_features = assembled.select_rows(train_rows);
    } else {
      b.train_risk = cox::predict_risk(*b.final_fit, std_train);
      b.test_risk = cox::predict_risk(*b.final_fit, std_test);
      b.train_features = assembled.select_rows(train_rows).select_columns(b.final_fit->feature_names);
    }
    if (runner.persist())
      write_id_values(runner.path("06_risks.csv"), {"id", "split", "risk"}, b.train_ids, b.test_ids, {b.train_risk},
                      {b.test_risk});
  });

  runner.run(Stage::select_groups, [&] {
    stratify::GroupingOptions go;
    go.alpha = config.strat_alpha;
    go.mode = config.pair_mode;
    go.with_metrics = false;
    go.horizon = config.horizon;
    b.train_groups = stratify::select_group_count(b.train_risk, train_out, go, config.n_max);
    const std::size_t n = b.train_groups->n_groups;
    const std::vector<int> test_labels = n > 1 ? stratify::apply_cut_points(b.test_risk, b.train_groups->cut_points)
                                               : std::vector<int>(b.test_risk.size(), 1);
    b.test_groups = stratify::describe_grouping(test_labels, n, test_out, go);
    b.test_groups->cut_points = b.train_groups->cut_points;

    if (config.tnm_baseline && manifest.stage_column && !test_rows.empty()) {
      try {
        const auto stage = gather<double>(ds.features.column(*manifest.stage_column), test_rows);
        const auto labels = stratify::tnm_stratify(stage, manifest.stage_codes);
        const auto groups = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()));
        b.tnm_groups = stratify::describe_grouping(labels, groups, test_out, go);
      } catch (const Error& e) {
        b.warnings.push_back(std::string("tnm baseline: ") + e.what());
      }
    }
    if (config.tree_baseline) {
      try {
        b.survival_tree = stratify::fit_survival_tree(b.train_features, train_out, config.tree);
        const auto labels = b.survival_tree->assign(assembled.select_rows(test_rows).select_columns(b.train_features.names()));
        b.tree_groups = stratify::describe_grouping(labels, b.survival_tree->n_leaves, test_out, go);
      } catch (const Error& e) {
        b.survival_tree.reset();
        b.warnings.push_back(std::string("survival tree baseline: ") + e.what());
      }
    }
    if (runner.persist()) {
      write_id_values(runner.path("07_groups.csv"), {"id", "split", "group"}, b.train_ids, b.test_ids,
                      {as_double(b.train_groups->labels)}, {as_double(b.test_groups->labels)});
      write_json(runner.path("07_stratification.json"),
                 {{"train", to_json(*b.train_groups)}, {"test", to_json(*b.test_groups)}});
    }
  });

  runner.run(Stage::boundaries, [&] {
    const std::size_t n = b.train_groups->n_groups;
    if (n < 2) return;
    const FeatureTable test_feat = assembled.select_rows(test_rows).select_columns(b.train_features.names());
    stratify::SvmOptions so = config.svm;
    so.seed = stream_seed(config.seed, {0x5F3});
    std::vector<stratify::BoundaryHyperplane> hyper(n - 1);
    std::vector<std::exception_ptr> errors(n - 1);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t k = 1; k < static_cast<std::int64_t>(n); ++k) {
      try {
        hyper[static_cast<std::size_t>(k - 1)] =
            stratify::fit_boundary_svm(b.train_features, b.train_groups->labels, static_cast<std::size_t>(k), test_feat,
                                       b.test_groups->labels, so);
      } catch (...) {
        errors[static_cast<std::size_t>(k - 1)] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    b.decision_list = stratify::assemble_decision_list(std::move(hyper));
    const auto assigned = stratify::assign_groups(*b.decision_list, b.train_features);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < assigned.size(); ++i) agree += assigned[i] == b.train_groups->labels[i] ? 1 : 0;
    b.decision_agreement = assigned.empty() ? 0.0 : static_cast<double>(agree) / static_cast<double>(assigned.size());
    if (runner.persist()) {
      json j = json::array();
      for (const auto& h : b.decision_list->boundaries) j.push_back(to_json(h));
      write_json(runner.path("08_boundaries.json"), {{"boundaries", j}, {"train_agreement", b.decision_agreement}});
    }
  });

  runner.run(Stage::metrics, [&] {
    if (test_rows.empty()) throw Error("no test rows to evaluate");
    const double h = config.horizon;
    const metrics::MetricFn cindex = [](std::span<const double> r, std::span<const SurvivalOutcome> o) {
      return metrics::concordance_index(r, o);
    };
    const metrics::MetricFn auc = [h](std::span<const double> r, std::span<const SurvivalOutcome> o) {
      return metrics::auc_at_horizon(r, o, h);
    };
    std::uint64_t id = 0;
    auto add = [&](const std::string& name, const metrics::MetricFn& fn, std::span<const double> scores, bool required) {
      const auto seed = stream_seed(config.seed, {0xE7A1, id++});
      try {
        b.metrics.push_back({name, metrics::bootstrap_ci(fn, scores, test_out, config.n_bootstrap, config.level, seed)});
      } catch (const Error& e) {
        if (required) throw Error(name + ": " + e.what());
        b.warnings.push_back(name + ": " + e.what());
      }
    };
    add("cindex_risk", cindex, b.test_risk, true);
    add("auc_horizon_risk", auc, b.test_risk, false);
    const auto group_score = as_double(b.test_groups->labels);
    add("cindex_group", cindex, group_score, b.test_groups->n_groups > 1);
    add("auc_horizon_group", auc, group_score, false);
    if (b.tnm_groups) {
      const auto s = as_double(b.tnm_groups->labels);
      add("cindex_tnm", cindex, s, false);
      add("auc_horizon_tnm", auc, s, false);
    }
    if (b.tree_groups) {
      // Tree groups are numbered from best survival, so the index is a risk score.
      const auto s = as_double(b.tree_groups->labels);
      add("cindex_tree", cindex, s, false);
      add("auc_horizon_tree", auc, s, false);
    }
    if (runner.persist()) {
      json j = json::object();
      for (const auto& m : b.metrics) j[m.name] = to_json(m.result);
      write_json(runner.path("09_metrics.json"), j);
    }
  });

  runner.run(Stage::emit, [&] {
    if (options.out_dir) emit_reports(b, *options.out_dir);
  });
  if (!b.ok() && options.out_dir) {
    try {
      emit_reports(b, *options.out_dir);
    } catch (const std::exception& e) {
      b.warnings.push_back(std::string("partial report: ") + e.what());
    }
  }
  return b;
}

// --- reports -------------------------------------------------------------

json bundle_to_json(const ReportBundle& b) {
  json j;
  j["provenance"] = b.provenance;
  j["rows"] = {{"rows_in", b.rows_in},
               {"rows_used", b.rows_used},
               {"rows_dropped_missing", b.rows_dropped_missing},
               {"train", b.n_train},
               {"test", b.n_test}};
  j["completed_stage"] = b.completed_stage;
  if (b.failure)
    j["failure"] = {{"stage", static_cast<int>(b.failure->stage)},
                    {"name", stage_name(b.failure->stage)},
                    {"message", b.failure->message}};
  j["distillation"] = json::array();
  for (const auto& d : b.distillation) j["distillation"].push_back(to_json(d));
  j["features"] = b.feature_names;
  j["standardization"] = to_json(b.standardization);
  if (b.initial_fit) j["cox_initial"] = to_json(*b.initial_fit);
  if (b.final_fit) j["cox"] = to_json(*b.final_fit);
  json strat = json::object();
  if (b.train_groups) strat["train"] = to_json(*b.train_groups);
  if (b.test_groups) strat["test"] = to_json(*b.test_groups);
  if (b.decision_list) {
    strat["boundaries"] = json::array();
    for (const auto& h : b.decision_list->boundaries) strat["boundaries"].push_back(to_json(h));
    strat["decision_list"] = b.decision_list->render();
    strat["decision_agreement_train"] = b.decision_agreement;
  }
  if (b.tnm_groups) strat["tnm_test"] = to_json(*b.tnm_groups);
  if (b.survival_tree) {
    strat["survival_tree"] = b.survival_tree->render();
    strat["survival_tree_leaves"] = b.survival_tree->n_leaves;
  }
  if (b.tree_groups) strat["tree_test"] = to_json(*b.tree_groups);
  j["stratification"] = strat;
  j["metrics"] = json::object();
  for (const auto& m : b.metrics) j["metrics"][m.name] = to_json(m.result);
  j["warnings"] = b.warnings;
  return j;
}

void emit_reports(const ReportBundle& b, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  write_json(out_dir / "report.json", bundle_to_json(b));

  {
    auto os = open_out(out_dir / "cox_table.csv");
    write_csv_row(os, {"name", "HR", "ci_lo", "ci_hi", "p", "effect"});
    if (b.final_fit)
      for (std::size_t j = 0; j < b.final_fit->size(); ++j) {
        const auto& f = *b.final_fit;
        write_csv_row(os, {f.feature_names[j], format_double(f.hazard_ratio[j]), format_double(f.hr_ci_lower[j]),
                           format_double(f.hr_ci_upper[j]), format_double(f.p_value[j]), cox::to_string(f.effect(j))});
      }
  }
  auto write_km = [&](const fs::path& path, const std::optional<stratify::StratificationResult>& r) {
    auto os = open_out(path);
    write_csv_row(os, {"group", "time", "survival", "ci_lo", "ci_hi"});
    if (!r) return;
    for (std::size_t g = 0; g < r->km_per_group.size(); ++g) {
      const auto& k = r->km_per_group[g];
      const auto group = std::to_string(g + 1);
      write_csv_row(os, {group, "0", "1", "1", "1"});
      for (std::size_t s = 0; s < k.steps(); ++s)
        write_csv_row(os, {group, format_double(k.times[s]), format_double(k.survival[s]), format_double(k.ci_lower[s]),
                           format_double(k.ci_upper[s])});
    }
  };
  write_km(out_dir / "km_groups.csv", b.train_groups);
  write_km(out_dir / "km_groups_test.csv", b.test_groups);
  {
    auto os = open_out(out_dir / "pairwise_p.csv");
    write_csv_row(os, {"group_a", "group_b", "statistic", "p"});
    if (b.train_groups && b.train_groups->pairwise) {
      const auto& pw = *b.train_groups->pairwise;
      for (std::size_t i = 0; i < pw.n_groups; ++i)
        for (std::size_t j = i + 1; j < pw.n_groups; ++j)
          if (!std::isnan(pw.p(i, j)))
            write_csv_row(os, {std::to_string(i + 1), std::to_string(j + 1),
                               format_double(pw.statistic[i * pw.n_groups + j]), format_double(pw.p(i, j))});
    }
  }
  {
    auto os = open_out(out_dir / "expressions.csv");
    write_csv_row(os, {"feature", "depth", "seed", "expression", "train_mse", "test_mse"});
    for (const auto& d : b.distillation)
      for (const auto& r : d.report.runs)
        write_csv_row(os, {d.teacher, std::to_string(r.depth), std::to_string(r.seed), gp::format_expr(r.expression),
                           format_double(r.train_mse), format_double(r.test_mse)});
  }
  {
    auto os = open_out(out_dir / "boundaries.csv");
    std::vector<std::string> header{"k"};
    for (const auto& n : b.train_features.names()) header.push_back("w_" + n);
    header.push_back("intercept");
    header.push_back("auroc");
    write_csv_row(os, header);
    if (b.decision_list)
      for (const auto& h : b.decision_list->boundaries) {
        std::vector<std::string> row{std::to_string(h.boundary_index)};
        for (double w : h.weights) row.push_back(format_double(w));
        row.push_back(format_double(h.intercept));
        row.push_back(format_double(h.test_auroc));
        write_csv_row(os, row);
      }
  }
  {
    auto os = open_out(out_dir / "metrics.csv");
    write_csv_row(os, {"metric", "point", "lo", "hi"});
    for (const auto& m : b.metrics)
      write_csv_row(os, {m.name, format_double(m.result.point), format_double(m.result.ci_lower),
                         format_double(m.result.ci_upper)});
  }
  {
    auto os = open_out(out_dir / "scatter.csv");
    std::vector<std::string> header{"id"};
    for (const auto& n : b.train_features.names()) header.push_back(n);
    header.push_back("group");
    write_csv_row(os, header);
    if (b.train_groups && b.train_features.rows() == b.train_ids.size())
      for (std::size_t i = 0; i < b.train_ids.size(); ++i) {
        std::vector<std::string> row{b.train_ids[i]};
        for (std::size_t j = 0; j < b.train_features.cols(); ++j) row.push_back(format_double(b.train_features.at(i, j)));
        row.push_back(std::to_string(b.train_groups->labels[i]));
        write_csv_row(os, row);
      }
  }
  {
    auto os = open_out(out_dir / "decision_list.txt");
    if (b.decision_list) os << b.decision_list->render();
  }
  if (b.survival_tree) {
    auto os = open_out(out_dir / "survival_tree.txt");
    os << b.survival_tree->render();
  }
}

std::map<std::string, double> read_risks(const fs::path& path) {
  const auto csv = data::read_csv(path);
  const auto id = csv.column("id"), risk = csv.column("risk");
  std::map<std::string, double> out;
  for (const auto& row : csv.rows) out[row[id]] = data::parse_number(row[risk], "risk");
  return out;
}

}  // namespace isurv::pipeline

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "isurv/dataset.hpp"
#include "isurv/parallel.hpp"
#include "isurv/pipeline.hpp"
#include "isurv/survival_stats.hpp"
#include "isurv/synth.hpp"

namespace fs = std::filesystem;
using namespace isurv;

namespace {

struct Common {
  std::string manifest;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--manifest", c.manifest, "dataset manifest (JSON)");
  app->add_option("--config", c.config, "pipeline config (JSON)");
  app->add_option("--seed", c.seed, "override the config seed");
  auto* out = app->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  app->add_option("--threads", c.threads, "worker threads (0 = runtime default)");
}

pipeline::PipelineConfig make_config(const Common& c) {
  pipeline::PipelineConfig cfg;
  if (!c.config.empty()) cfg = pipeline::load_config(c.config);
  if (!c.manifest.empty()) cfg.manifest = c.manifest;
  if (cfg.manifest.empty()) throw Error("no manifest given (--manifest or config 'manifest')");
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

int run_stages(const Common& c, pipeline::Stage last, const std::string& risks_path, bool force_distill) {
  auto cfg = make_config(c);
  if (force_distill) cfg.distill.enabled = true;
  pipeline::RunOptions opt;
  opt.last_stage = last;
  opt.out_dir = c.out;
  if (!risks_path.empty()) opt.risks = pipeline::read_risks(risks_path);
  const auto bundle = pipeline::run_pipeline(cfg, opt);
  if (bundle.ok() && last != pipeline::Stage::emit) pipeline::emit_reports(bundle, c.out);
  for (const auto& w : bundle.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!bundle.ok()) {
    std::fprintf(stderr, "error: %s\n", bundle.failure->describe().c_str());
    return 3;
  }
  return 0;
}

int run_km(const Common& c, const std::string& group_column, const std::string& labels_path,
           const std::string& split, double alpha, bool consecutive) {
  const auto manifest = data::load_manifest(make_config(c).manifest);
  const auto ds = data::load_dataset(manifest);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.rows_used; ++i)
    if (split == "all" || (split == "test") == static_cast<bool>(ds.is_test[i])) rows.push_back(i);

  std::map<std::string, int> by_id;
  if (!labels_path.empty()) {
    const auto csv = data::read_csv(labels_path);
    const auto id = csv.column("id"), g = csv.column("group");
    for (const auto& r : csv.rows) by_id[r[id]] = static_cast<int>(data::parse_number(r[g], "group"));
  }
  // Distinct raw codes become groups 1..n in ascending order.
  std::map<double, int> codes;
  std::vector<double> raw;
  for (auto i : rows) {
    double v;
    if (!labels_path.empty()) {
      auto it = by_id.find(ds.ids[i]);
      if (it == by_id.end()) throw Error("no group for subject '" + ds.ids[i] + "'");
      v = it->second;
    } else {
      v = ds.features.column(group_column)[i];
    }
    raw.push_back(v);
    codes[v] = 0;
  }
  int next = 1;
  for (auto& [code, label] : codes) label = next++;
  std::vector<int> labels;
  for (double v : raw) labels.push_back(codes[v]);
  const auto outcomes = gather<SurvivalOutcome>(ds.outcomes, rows);
  const auto groups = stats::split_by_label(outcomes, labels, codes.size());

  fs::create_directories(c.out);
  std::ofstream km(fs::path(c.out) / "km_groups.csv");
  data::write_csv_row(km, {"group", "code", "time", "survival", "ci_lo", "ci_hi", "at_risk", "events"});
  for (const auto& [code, label] : codes) {
    const auto curve = stats::kaplan_meier(groups[static_cast<std::size_t>(label - 1)]);
    for (std::size_t s = 0; s < curve.steps(); ++s)
      data::write_csv_row(km, {std::to_string(label), data::format_double(code), data::format_double(curve.times[s]),
                               data::format_double(curve.survival[s]), data::format_double(curve.ci_lower[s]),
                               data::format_double(curve.ci_upper[s]), std::to_string(curve.n_at_risk[s]),
                               std::to_string(curve.n_events[s])});
  }
  if (codes.size() >= 2) {
    const auto pw = stats::pairwise_logrank(groups, alpha, consecutive ? stats::PairMode::consecutive : stats::PairMode::all);
    std::ofstream os(fs::path(c.out) / "pairwise_p.csv");
    data::write_csv_row(os, {"group_a", "group_b", "statistic", "p", "significant"});
    for (std::size_t i = 0; i < pw.n_groups; ++i)
      for (std::size_t j = i + 1; j < pw.n_groups; ++j)
        if (!std::isnan(pw.p(i, j)))
          data::write_csv_row(os, {std::to_string(i + 1), std::to_string(j + 1),
                                   data::format_double(pw.statistic[i * pw.n_groups + j]), data::format_double(pw.p(i, j)),
                                   pw.p(i, j) <= pw.corrected_alpha ? "1" : "0"});
    std::printf("groups=%zu tests=%zu corrected_alpha=%.6g all_distinct=%s\n", pw.n_groups, pw.n_tests,
                pw.corrected_alpha, pw.all_distinct ? "yes" : "no");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isurv: interpretable survival modelling"};
  app.require_subcommand(1);

  Common common;

  auto* synth = app.add_subcommand("synth", "generate a synthetic survival dataset");
  std::string synth_config;
  std::optional<std::size_t> synth_n, synth_strata;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  int synth_threads = 0;
  synth->add_option("--config", synth_config, "generator config (JSON)");
  synth->add_option("--n", synth_n, "number of subjects");
  synth->add_option("--strata", synth_strata, "number of hazard strata");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--threads", synth_threads, "ignored; accepted for symmetry");

  auto* km = app.add_subcommand("km", "Kaplan-Meier curves and pairwise log-rank for a grouping");
  add_common(km, common);
  std::string group_column, labels_path, split = "all";
  double alpha = 0.05;
  bool consecutive = false;
  km->add_option("--group-column", group_column, "declared feature holding group codes");
  km->add_option("--labels", labels_path, "CSV with columns id,group");
  km->add_option("--split", split, "rows to use")->check(CLI::IsMember({"all", "train", "test"}));
  km->add_option("--alpha", alpha, "family-wise significance level");
  km->add_flag("--consecutive", consecutive, "test adjacent groups only");

  auto* fit = app.add_subcommand("fit-cox", "fit, prune and score the Cox model (stages 1-6)");
  add_common(fit, common);
  auto* distill = app.add_subcommand("distill", "symbolic distillation of teacher columns (stage 1)");
  add_common(distill, common);
  std::string risks_path;
  auto* strat = app.add_subcommand("stratify", "risk groups, boundaries and decision list (stages 1-8)");
  add_common(strat, common);
  strat->add_option("--risks", risks_path, "CSV with columns id,risk; skips the Cox stages");
  auto* eval = app.add_subcommand("evaluate", "held-out metrics with bootstrap intervals (stages 1-9)");
  add_common(eval, common);
  eval->add_option("--risks", risks_path, "CSV with columns id,risk; skips the Cox stages");
  auto* full = app.add_subcommand("pipeline", "run every stage and write the report bundle");
  add_common(full, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      synth::SynthConfig cfg;
      if (!synth_config.empty()) {
        std::ifstream in(synth_config);
        if (!in) throw Error("cannot read " + synth_config);
        cfg = synth::config_from_json(nlohmann::json::parse(in));
      }
      if (synth_n) cfg.n_subjects = *synth_n;
      if (synth_strata) cfg.strata = *synth_strata;
      if (synth_seed) cfg.rng_seed = *synth_seed;
      const auto d = synth::synth_survival(cfg);
      synth::write_synth(d, cfg, synth_out);
      std::printf("subjects=%zu censored=%.4f\n", d.outcomes.size(), d.censoring_rate);
      return 0;
    }
    if (common.threads > 0) set_num_threads(common.threads);
    if (km->parsed()) {
      if (group_column.empty() == labels_path.empty()) throw Error("give exactly one of --group-column or --labels");
      return run_km(common, group_column, labels_path, split, alpha, consecutive);
    }
    if (fit->parsed()) return run_stages(common, pipeline::Stage::predict_risk, "", false);
    if (distill->parsed()) return run_stages(common, pipeline::Stage::distill, "", true);
    if (strat->parsed()) return run_stages(common, pipeline::Stage::boundaries, risks_path, false);
    if (eval->parsed()) return run_stages(common, pipeline::Stage::metrics, risks_path, false);
    if (full->parsed()) return run_stages(common, pipeline::Stage::emit, "", false);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

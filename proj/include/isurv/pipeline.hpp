#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isurv/cox.hpp"
#include "isurv/dataset.hpp"
#include "isurv/gp.hpp"
#include "isurv/metrics.hpp"
#include "isurv/stratify.hpp"

namespace isurv::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct DistillSettings {
  bool enabled = false;
  std::vector<int> depths{2, 3, 4};
  int seeds = 5;
  int generations = 512;
  int base_population = 64;
  std::vector<std::string> teachers;  // empty: every teacher column
  std::vector<std::string> inputs;    // empty: every feature column
  std::optional<int> depth;           // empty: depth with the lowest test MSE
};

struct PipelineConfig {
  std::filesystem::path manifest;
  std::uint64_t seed = 0;
  DistillSettings distill;
  cox::Normalization normalization = cox::Normalization::zscore;
  double prune_alpha = 0.05;
  std::vector<std::string> cox_columns;  // empty: teachers, else features
  double strat_alpha = 0.05;
  std::size_t n_max = 6;
  stats::PairMode pair_mode = stats::PairMode::all;
  bool tnm_baseline = true;
  bool tree_baseline = true;
  stratify::TreeConfig tree;
  stratify::SvmOptions svm;
  double horizon = metrics::kTwoYearsDays;
  std::size_t n_bootstrap = 1000;
  double level = 0.95;
};

// Unknown keys and wrong types are rejected. A relative manifest path is
// resolved against base_dir.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

enum class Stage {
  distill = 1,
  assemble,
  standardize,
  fit_cox,
  prune_refit,
  predict_risk,
  select_groups,
  boundaries,
  metrics,
  emit,
};
const char* stage_name(Stage s);

struct StageFailure {
  Stage stage;
  std::string message;

  std::string describe() const;  // "stage 5 (prune_refit): ..."
};

struct DistilledFeature {
  std::string teacher;
  int chosen_depth = 0;
  gp::DistillReport report;
};

struct MetricRow {
  std::string name;
  metrics::MetricResult result;
};

struct ReportBundle {
  nlohmann::json provenance;
  std::size_t rows_in = 0;
  std::size_t rows_used = 0;
  std::size_t rows_dropped_missing = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;

  std::vector<DistilledFeature> distillation;
  std::vector<std::string> feature_names;  // Cox inputs after assembly
  cox::NormParams standardization;
  std::optional<cox::CoxFit> initial_fit;
  std::optional<cox::CoxFit> final_fit;

  std::vector<std::string> train_ids, test_ids;
  std::vector<double> train_risk, test_risk;
  FeatureTable train_features;  // unstandardized final-fit columns, train rows
  std::optional<stratify::StratificationResult> train_groups;
  std::optional<stratify::StratificationResult> test_groups;
  std::optional<stratify::DecisionList> decision_list;
  double decision_agreement = 0.0;  // train rows where the list matches quantile labels

  std::optional<stratify::StratificationResult> tnm_groups;  // test rows
  std::optional<stratify::SurvivalTree> survival_tree;
  std::optional<stratify::StratificationResult> tree_groups;  // test rows

  std::vector<MetricRow> metrics;
  std::vector<std::string> warnings;
  int completed_stage = 0;
  std::optional<StageFailure> failure;

  bool ok() const { return !failure.has_value(); }
  const MetricRow* metric(std::string_view name) const;
};

struct RunOptions {
  Stage last_stage = Stage::emit;
  // Writes per-stage artifacts under out_dir/stages and the report files.
  std::optional<std::filesystem::path> out_dir;
  // Risk per subject id; skips the Cox stages when set.
  std::optional<std::map<std::string, double>> risks;
};

// Stage errors do not throw: the bundle records the failing stage and keeps
// everything computed before it.
ReportBundle run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

nlohmann::json bundle_to_json(const ReportBundle& bundle);
void emit_reports(const ReportBundle& bundle, const std::filesystem::path& out_dir);

// id -> risk from a CSV with columns id and risk.
std::map<std::string, double> read_risks(const std::filesystem::path& path);

}  // namespace isurv::pipeline

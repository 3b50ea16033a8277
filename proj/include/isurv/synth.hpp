#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "isurv/common.hpp"
#include "isurv/expr.hpp"

namespace isurv::synth {

enum class Distribution { uniform, normal, bernoulli };

struct CovariateSpec {
  std::string name;
  Distribution dist = Distribution::normal;
  double a = 0.0;  // uniform low | normal mean | bernoulli p
  double b = 1.0;  // uniform high | normal sd
};

struct TeacherSpec {
  std::string name;
  std::string expression;  // parsed against the covariate names
  double noise_sd = 0.0;
};

struct SynthConfig {
  std::size_t n_subjects = 1000;
  double weibull_shape = 1.5;
  double weibull_scale = 1000.0;  // days
  std::vector<double> beta_true;
  std::vector<CovariateSpec> covariates;  // empty: standard normal x1..xp
  double censoring_target = 0.3;
  std::size_t strata = 0;           // 0 or 1: no strata column
  double strata_hazard_ratio = 2.0; // between adjacent strata
  double test_fraction = 0.3;
  std::vector<TeacherSpec> teachers;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

SynthConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SynthConfig& c);

struct SynthData {
  FeatureTable covariates;  // includes "stratum" when strata > 1
  FeatureTable teachers;
  Outcomes outcomes;
  std::vector<double> true_risk;  // log relative hazard
  std::vector<int> strata;        // 1-based, empty without strata
  std::vector<bool> is_test;
  double censoring_rate = 0.0;
  double censoring_hazard = 0.0;
};

SynthData synth_survival(const SynthConfig& config);

// Writes data.csv, truth.json and manifest.json into dir.
void write_synth(const SynthData& data, const SynthConfig& config, const std::filesystem::path& dir);

// eval_expr per row plus N(0, noise_sd) noise.
std::vector<double> synth_teacher(const gp::ExprTree& expression, const FeatureTable& data,
                                  double noise_sd, std::uint64_t seed = 0);

}  // namespace isurv::synth

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "isurv/expr.hpp"
#include "isurv/random.hpp"

namespace isurv::gp {

enum class LinkageMode { univariate, random_tree };

// Groups of template slot positions mixed together.
using Linkage = std::vector<std::vector<std::size_t>>;

Linkage univariate_linkage(std::size_t slots);
// Random hierarchical merge of the singletons; every merged set except the
// full set becomes a group.
Linkage random_tree_linkage(std::size_t slots, Rng& rng);

struct GpConfig {
  int depth = 2;
  int generations = 512;  // total across all interleaved populations
  int base_population = 64;
  int seeds = 5;
  std::optional<std::pair<double, double>> constant_range;  // default [-10,10] u target range
  std::uint64_t rng_seed = 0;
  LinkageMode linkage = LinkageMode::univariate;
  int ims_interval = 4;

  void validate() const;
};

struct Individual {
  ExprTree tree;
  double mse = 0.0;
};

/// Training-set MSE under least-squares linear scaling of the tree output.
/// Counts every evaluation it performs.
class Fitness {
 public:
  Fitness(const FeatureTable& data, std::span<const double> target);

  struct Workspace {
    BatchEvaluator evaluator;
    std::vector<double> core;
  };
  Workspace workspace() const;

  // Stores the fitted intercept/slope in the tree and returns the MSE.
  double evaluate(ExprTree& tree, Workspace& ws) const;
  double evaluate(ExprTree& tree) const;

  std::uint64_t evaluations() const { return counter_->load(); }
  const std::vector<std::string>& variables() const { return data_->names(); }
  std::pair<double, double> target_range() const;

 private:
  const FeatureTable* data_;
  std::span<const double> target_;
  double target_mean_ = 0.0;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

ExprTree random_tree(int depth, const std::vector<std::string>& variables,
                     std::pair<double, double> constant_range, bool full, Rng& rng);

struct GenerationStats {
  std::uint64_t evaluations = 0;
  std::uint64_t accepted = 0;
};

// One round of gene-pool optimal mixing. Individual i draws from stream
// (seed, i) and donors come from the incoming population, so the result does
// not depend on thread count.
std::vector<Individual> gom_generation(std::span<const Individual> population,
                                       const Linkage& linkage, const Fitness& fitness,
                                       std::uint64_t seed, GenerationStats* stats = nullptr);

namespace serial {
std::vector<Individual> gom_generation(std::span<const Individual> population,
                                       const Linkage& linkage, const Fitness& fitness,
                                       std::uint64_t seed, GenerationStats* stats = nullptr);
}  // namespace serial

struct PopulationTrace {
  std::size_t size = 0;
  int generations = 0;
  std::vector<double> best_mse;  // after initialization, then after each generation
};

struct DistillResult {
  ExprTree expression;
  double train_mse = 0.0;
  double test_mse = 0.0;
  int depth = 0;
  int seed = 0;
  std::uint64_t evaluations = 0;      // counted by the engine
  std::uint64_t fitness_calls = 0;    // counted by the fitness function
  std::uint64_t evaluation_bound = 0; // init + sum(size * groups * generations)
  int generations = 0;
  std::vector<PopulationTrace> populations;
};

DistillResult run_ims(const GpConfig& config, const FeatureTable& data,
                      std::span<const double> target, const FeatureTable& test_data,
                      std::span<const double> test_target);

struct DistillReport {
  std::vector<int> depths;
  std::vector<DistillResult> runs;  // depth-major, then seed
  std::vector<std::size_t> best;    // index into runs per depth: lowest test MSE

  const DistillResult& best_for_depth(int depth) const;
};

DistillReport distill_feature(const FeatureTable& data, std::span<const double> target,
                              const FeatureTable& test_data, std::span<const double> test_target,
                              const GpConfig& base, std::vector<int> depths = {2, 3, 4});

}  // namespace isurv::gp

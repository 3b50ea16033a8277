#include "isurv/gp.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>

namespace isurv::gp {

Linkage univariate_linkage(std::size_t slots) {
  Linkage l(slots);
  for (std::size_t i = 0; i < slots; ++i) l[i] = {i};
  return l;
}

Linkage random_tree_linkage(std::size_t slots, Rng& rng) {
  Linkage groups = univariate_linkage(slots);
  std::vector<std::vector<std::size_t>> open = groups;
  while (open.size() > 2) {
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    std::size_t a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    if (a > b) std::swap(a, b);
    auto merged = open[a];
    merged.insert(merged.end(), open[b].begin(), open[b].end());
    std::sort(merged.begin(), merged.end());
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(b));
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(a));
    groups.push_back(merged);
    open.push_back(std::move(merged));
  }
  return groups;
}

void GpConfig::validate() const {
  if (generations < 1) throw Error("budget too small");
  if (depth < 2 || depth > 4) throw Error("tree depth must be 2, 3 or 4");
  if (base_population < 2) throw Error("base population must be at least 2");
  if (seeds < 1) throw Error("at least one seed per depth is required");
  if (ims_interval < 1) throw Error("IMS interval must be positive");
  if (constant_range && !(constant_range->first <= constant_range->second))
    throw Error("constant range is empty");
}

Fitness::Fitness(const FeatureTable& data, std::span<const double> target)
    : data_(&data), target_(target), counter_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (data.rows() == 0) throw Error("empty data");
  if (data.rows() != target.size()) throw Error("data rows and target differ in length");
  for (double y : target)
    if (!std::isfinite(y)) throw Error("non-finite target value");
  for (double y : target) target_mean_ += y;
  target_mean_ /= static_cast<double>(target.size());
}

Fitness::Workspace Fitness::workspace() const {
  return Workspace{BatchEvaluator(*data_, data_->names()), {}};
}

std::pair<double, double> Fitness::target_range() const {
  auto [lo, hi] = std::minmax_element(target_.begin(), target_.end());
  return {*lo, *hi};
}

double Fitness::evaluate(ExprTree& tree, Workspace& ws) const {
  counter_->fetch_add(1, std::memory_order_relaxed);
  ws.evaluator.eval_core(tree, ws.core);
  const auto& f = ws.core;
  const std::size_t n = f.size();

  double mf = 0.0;
  bool constant_output = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(f[i])) return std::numeric_limits<double>::infinity();
    mf += f[i];
    constant_output = constant_output && f[i] == f[0];
  }
  mf /= static_cast<double>(n);
  double slope = 0.0;
  if (!constant_output) {
    double cov = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double df = f[i] - mf;
      cov += df * (target_[i] - target_mean_);
      var += df * df;
    }
    slope = var > 0.0 ? cov / var : 0.0;
    if (!std::isfinite(slope)) slope = 0.0;
  }
  const double intercept = target_mean_ - slope * mf;
  tree.set_scaling(intercept, slope);

  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (intercept + slope * f[i]) - target_[i];
    s += e * e;
  }
  const double mse = s / static_cast<double>(n);
  return std::isfinite(mse) ? mse : std::numeric_limits<double>::infinity();
}

double Fitness::evaluate(ExprTree& tree) const {
  auto ws = workspace();
  return evaluate(tree, ws);
}

namespace {

constexpr Op kNumericOps[] = {Op::add, Op::sub, Op::mul, Op::div, Op::lt, Op::ge};
constexpr Op kDeepOps[] = {Op::land, Op::lor, Op::lnot, Op::ite};

Node random_terminal(std::size_t n_vars, std::pair<double, double> crange, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (n_vars > 0 && coin(rng) < 0.5) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(n_vars) - 1);
    return Node{Op::variable, pick(rng), 0.0};
  }
  std::uniform_real_distribution<double> c(crange.first, crange.second);
  return Node{Op::constant, -1, c(rng)};
}

}  // namespace

ExprTree random_tree(int depth, const std::vector<std::string>& variables,
                     std::pair<double, double> constant_range, bool full, Rng& rng) {
  ExprTree tree(depth, variables);
  std::vector<bool> need_bool(tree.size(), false);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const int level = ExprTree::level_of(i);
    std::vector<Op> choices;
    if (need_bool[i]) {
      choices = {Op::lt, Op::ge};
      if (level <= depth - 2) choices.insert(choices.end(), {Op::land, Op::lor, Op::lnot});
    } else if (level < depth && (full || coin(rng) < 0.5)) {
      choices.assign(std::begin(kNumericOps), std::end(kNumericOps));
      if (level <= depth - 2) choices.insert(choices.end(), std::begin(kDeepOps), std::end(kDeepOps));
    }
    if (choices.empty()) {
      tree.node(i) = random_terminal(variables.size(), constant_range, rng);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
      tree.node(i) = Node{choices[pick(rng)], -1, 0.0};
    }
    if (!tree.is_leaf_slot(i))
      for (int k = 0; k < arity(tree.node(i).op); ++k)
        need_bool[ExprTree::child(i, k)] = needs_bool_child(tree.node(i).op, k);
  }
  return tree;
}

namespace {

Individual mix_individual(std::span<const Individual> population, std::size_t self,
                          const Linkage& linkage, const Fitness& fitness, Rng& rng,
                          Fitness::Workspace& ws, GenerationStats& stats) {
  Individual child = population[self];
  const std::size_t n = population.size();
  if (n < 2) return child;

  std::vector<std::size_t> order(linkage.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);

  std::vector<Node> backup;
  for (std::size_t g : order) {
    std::size_t donor = pick(rng);
    if (donor >= self) ++donor;
    const auto& positions = linkage[g];
    const ExprTree& dt = population[donor].tree;

    bool changed = false;
    for (auto pos : positions)
      if (!(child.tree.node(pos) == dt.node(pos))) changed = true;
    if (!changed) continue;

    const auto active_before = child.tree.active_mask();
    bool touches_active = false;
    backup.clear();
    for (auto pos : positions) {
      backup.push_back(child.tree.node(pos));
      touches_active = touches_active || active_before[pos];
      child.tree.node(pos) = dt.node(pos);
    }
    auto restore = [&] {
      for (std::size_t k = 0; k < positions.size(); ++k) child.tree.node(positions[k]) = backup[k];
    };
    if (!touches_active) {
      ++stats.accepted;  // neutral change of inert slots
      continue;
    }
    if (!child.tree.valid()) {
      restore();
      continue;
    }
    const double old_a = child.tree.intercept(), old_b = child.tree.slope();
    const double mse = fitness.evaluate(child.tree, ws);
    ++stats.evaluations;
    if (mse <= child.mse) {
      child.mse = mse;
      ++stats.accepted;
    } else {
      restore();
      child.tree.set_scaling(old_a, old_b);
    }
  }
  return child;
}

void check_population(std::span<const Individual> population) {
  if (population.empty()) throw Error("empty population");
  for (const auto& ind : population)
    if (ind.tree.depth() != population[0].tree.depth())
      throw Error("population mixes template depths");
}

}  // namespace

namespace serial {

std::vector<Individual> gom_generation(std::span<const Individual> population,
                                       const Linkage& linkage, const Fitness& fitness,
                                       std::uint64_t seed, GenerationStats* stats) {
  check_population(population);
  std::vector<Individual> next;
  next.reserve(population.size());
  GenerationStats total;
  auto ws = fitness.workspace();
  for (std::size_t i = 0; i < population.size(); ++i) {
    Rng rng = make_rng(seed, {i});
    next.push_back(mix_individual(population, i, linkage, fitness, rng, ws, total));
  }
  if (stats) {
    stats->evaluations += total.evaluations;
    stats->accepted += total.accepted;
  }
  return next;
}

}  // namespace serial

std::vector<Individual> gom_generation(std::span<const Individual> population,
                                       const Linkage& linkage, const Fitness& fitness,
                                       std::uint64_t seed, GenerationStats* stats) {
  check_population(population);
  const auto n = static_cast<std::int64_t>(population.size());
  std::vector<Individual> next(population.size());
  std::uint64_t evals = 0, accepted = 0;
  std::exception_ptr failure;
#pragma omp parallel reduction(+ : evals, accepted)
  {
    auto ws = fitness.workspace();
    GenerationStats local;
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
        next[static_cast<std::size_t>(i)] =
            mix_individual(population, static_cast<std::size_t>(i), linkage, fitness, rng, ws, local);
      } catch (...) {
#pragma omp critical(isurv_gom_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    evals += local.evaluations;
    accepted += local.accepted;
  }
  if (failure) std::rethrow_exception(failure);
  if (stats) {
    stats->evaluations += evals;
    stats->accepted += accepted;
  }
  return next;
}

DistillResult run_ims(const GpConfig& config, const FeatureTable& data,
                      std::span<const double> target, const FeatureTable& test_data,
                      std::span<const double> test_target) {
  config.validate();
  const Fitness fitness(data, target);
  const auto vars = data.names();
  auto crange = config.constant_range.value_or([&] {
    auto [lo, hi] = fitness.target_range();
    return std::pair{std::min(-10.0, lo), std::max(10.0, hi)};
  }());

  struct Population {
    std::vector<Individual> members;
    int generations = 0;
  };
  std::vector<Population> pops;
  DistillResult result;
  result.depth = config.depth;
  std::optional<Individual> best;
  const std::size_t slots = ExprTree::slot_count(config.depth);

  auto consider = [&](const std::vector<Individual>& members) {
    for (const auto& ind : members)
      if (!best || ind.mse < best->mse) best = ind;
  };
  auto best_of = [](const std::vector<Individual>& members) {
    double b = std::numeric_limits<double>::infinity();
    for (const auto& ind : members) b = std::min(b, ind.mse);
    return b;
  };

  int total = 0;
  std::function<void(std::size_t)> step = [&](std::size_t k) {
    if (total >= config.generations) return;
    if (k == pops.size()) {
      const std::size_t size = static_cast<std::size_t>(config.base_population) << k;
      Population pop;
      pop.members.resize(size);
      auto ws = fitness.workspace();
      for (std::size_t i = 0; i < size; ++i) {
        Rng rng = make_rng(config.rng_seed, {0x1017u, k, i});
        auto& ind = pop.members[i];
        ind.tree = random_tree(config.depth, vars, crange, i % 2 == 0, rng);
        ind.mse = fitness.evaluate(ind.tree, ws);
      }
      result.evaluations += size;
      result.evaluation_bound += size;
      consider(pop.members);
      result.populations.push_back({size, 0, {best_of(pop.members)}});
      pops.push_back(std::move(pop));
    }
    auto& pop = pops[k];
    Linkage linkage;
    if (config.linkage == LinkageMode::random_tree) {
      Rng rng = make_rng(config.rng_seed, {0xF05u, k, static_cast<std::uint64_t>(pop.generations)});
      linkage = random_tree_linkage(slots, rng);
    } else {
      linkage = univariate_linkage(slots);
    }
    GenerationStats stats;
    pop.members = gom_generation(pop.members, linkage, fitness,
                                 stream_seed(config.rng_seed, {0x6E4u, k, static_cast<std::uint64_t>(pop.generations)}),
                                 &stats);
    ++pop.generations;
    ++total;
    result.evaluations += stats.evaluations;
    result.evaluation_bound += pop.members.size() * linkage.size();
    consider(pop.members);
    auto& trace = result.populations[k];
    trace.generations = pop.generations;
    trace.best_mse.push_back(best_of(pop.members));
    if (pop.generations % config.ims_interval == 0) step(k + 1);
  };
  while (total < config.generations) step(0);

  result.expression = best->tree;
  result.train_mse = expr_mse(result.expression, data, target);
  result.test_mse = test_data.rows() > 0 ? expr_mse(result.expression, test_data, test_target)
                                         : std::numeric_limits<double>::quiet_NaN();
  result.generations = total;
  result.fitness_calls = fitness.evaluations();
  return result;
}

const DistillResult& DistillReport::best_for_depth(int depth) const {
  for (std::size_t d = 0; d < depths.size(); ++d)
    if (depths[d] == depth) return runs.at(best.at(d));
  throw Error("no distillation runs at depth " + std::to_string(depth));
}

DistillReport distill_feature(const FeatureTable& data, std::span<const double> target,
                              const FeatureTable& test_data, std::span<const double> test_target,
                              const GpConfig& base, std::vector<int> depths) {
  if (depths.empty()) throw Error("no tree depths requested");
  for (int d : depths) {
    GpConfig c = base;
    c.depth = d;
    c.validate();
  }
  if (test_data.rows() == 0) throw Error("distillation needs held-out rows");
  if (test_data.rows() != test_target.size()) throw Error("test rows and target differ in length");

  DistillReport report;
  report.depths = depths;
  const std::size_t seeds = static_cast<std::size_t>(base.seeds);
  const std::size_t total = depths.size() * seeds;
  report.runs.resize(total);
  std::vector<std::exception_ptr> failures(total);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(total); ++r) {
    const auto idx = static_cast<std::size_t>(r);
    const int depth = depths[idx / seeds];
    const auto s = idx % seeds;
    GpConfig c = base;
    c.depth = depth;
    c.rng_seed = stream_seed(base.rng_seed, {static_cast<std::uint64_t>(depth), s});
    try {
      report.runs[idx] = run_ims(c, data, target, test_data, test_target);
      report.runs[idx].seed = static_cast<int>(s);
    } catch (...) {
      failures[idx] = std::current_exception();
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  for (std::size_t d = 0; d < depths.size(); ++d) {
    std::size_t best = d * seeds;
    for (std::size_t s = 1; s < seeds; ++s)
      if (report.runs[d * seeds + s].test_mse < report.runs[best].test_mse) best = d * seeds + s;
    report.best.push_back(best);
  }
  return report;
}

}  // namespace isurv::gp

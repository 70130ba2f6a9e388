// Copyright 2026 The SESS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sess/confidence.hpp"
#include "sess/corpus.hpp"
#include "sess/error.hpp"
#include "sess/objectives.hpp"
#include "sess/parallel.hpp"
#include "sess/random.hpp"
#include "sess/selection.hpp"
#include "sess/similarity.hpp"

// A desk-scale stand-in for an automatic prompt optimization loop. A "prompt"
// is a vector theta, an example j has features z_j and difficulty d_j, and
// the probability the scorer answers j correctly is sigmoid(theta . z_j - d_j).
// Scores are expected accuracies, so no evaluation noise enters and any
// difference between selectors comes from which examples they picked.

namespace sess::sim {

struct TaskConfig {
  std::size_t pool_size = 200;
  std::size_t dim = 8;
  std::size_t clusters = 6;
  /// Spread of examples around their cluster center.
  double cluster_spread = 0.6;
  std::uint64_t seed = 7;
};

/// Features and difficulties, row-major features.
struct SyntheticTask {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<double> difficulty;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return difficulty.size(); }
  std::span<const double> z(std::size_t j) const { return {features.data() + j * dim, dim}; }
};

struct SyntheticPrompt {
  std::vector<double> theta;
};

/// Clustered pool with unequal cluster sizes: cluster c gets weight
/// proportional to 1/(c+1), so a uniform sample over-represents the big
/// clusters relative to how many distinct regions the pool has.
inline SyntheticTask make_task(const TaskConfig& cfg) {
  if (cfg.pool_size == 0 || cfg.dim == 0 || cfg.clusters == 0)
    throw Error(ErrorCode::InvalidArgument, "pool_size, dim and clusters must be positive");
  Rng rng(split_seed(cfg.seed, 0));
  std::vector<double> centers(cfg.clusters * cfg.dim);
  for (auto& c : centers) c = rng.normal();
  std::vector<double> center_difficulty(cfg.clusters);
  for (auto& d : center_difficulty) d = rng.normal();
  double total = 0.0;
  for (std::size_t c = 0; c < cfg.clusters; ++c) total += 1.0 / static_cast<double>(c + 1);

  SyntheticTask task;
  task.dim = cfg.dim;
  task.seed = cfg.seed;
  task.features.resize(cfg.pool_size * cfg.dim);
  task.difficulty.resize(cfg.pool_size);
  for (std::size_t j = 0; j < cfg.pool_size; ++j) {
    double u = rng.uniform() * total;
    std::size_t c = 0;
    while (c + 1 < cfg.clusters && u >= 1.0 / static_cast<double>(c + 1)) {
      u -= 1.0 / static_cast<double>(c + 1);
      ++c;
    }
    for (std::size_t d = 0; d < cfg.dim; ++d)
      task.features[j * cfg.dim + d] = centers[c * cfg.dim + d] + cfg.cluster_spread * rng.normal();
    task.difficulty[j] = center_difficulty[c] + 0.5 * rng.normal();
  }
  return task;
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline double success_probability(const SyntheticTask& task, const SyntheticPrompt& prompt,
                                  std::size_t j) {
  const auto z = task.z(j);
  double dot = 0.0;
  for (std::size_t d = 0; d < task.dim; ++d) dot += prompt.theta[d] * z[d];
  return sigmoid(dot - task.difficulty[j]);
}

/// Mean success probability over `subset`, summed in the order given.
inline double expected_accuracy(const SyntheticTask& task, const SyntheticPrompt& prompt,
                                std::span<const std::size_t> subset) {
  if (subset.empty()) throw Error(ErrorCode::EmptySubset, "expected_accuracy");
  if (prompt.theta.size() != task.dim)
    throw Error(ErrorCode::SizeMismatch, "prompt dimension differs from task dimension");
  double total = 0.0;
  for (auto j : subset) {
    if (j >= task.size()) throw Error(ErrorCode::IndexOutOfRange, std::to_string(j));
    total += success_probability(task, prompt, j);
  }
  return total / static_cast<double>(subset.size());
}

inline std::vector<std::size_t> full_pool(const SyntheticTask& task) {
  std::vector<std::size_t> all(task.size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

struct OptimizerConfig {
  std::size_t steps = 100;
  std::size_t candidates_per_step = 7;
  /// Standard deviation of the Gaussian proposal around the incumbent.
  double step_size = 0.5;
};

struct TrajectoryPoint {
  double subset_score;
  double full_score;
};

struct OptimizationRun {
  SyntheticPrompt best;
  std::vector<TrajectoryPoint> trajectory;  // one point per step, after acceptance
};

/// Hill climbing on the subset score. Each step proposes candidates around
/// the incumbent and keeps the best one only if it beats the incumbent, so
/// the subset score never decreases.
inline OptimizationRun run_optimization(const SyntheticTask& task,
                                        std::span<const std::size_t> subset,
                                        const OptimizerConfig& cfg, std::uint64_t seed) {
  if (cfg.steps == 0) throw Error(ErrorCode::InvalidArgument, "steps must be >= 1");
  if (cfg.candidates_per_step == 0)
    throw Error(ErrorCode::InvalidArgument, "candidates_per_step must be >= 1");
  if (subset.empty()) throw Error(ErrorCode::EmptySubset, "run_optimization");
  const auto everything = full_pool(task);
  Rng rng(seed);
  OptimizationRun run;
  run.best.theta.assign(task.dim, 0.0);
  double best_score = expected_accuracy(task, run.best, subset);
  run.trajectory.reserve(cfg.steps);
  SyntheticPrompt candidate;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    SyntheticPrompt step_best;
    double step_score = -1.0;
    for (std::size_t c = 0; c < cfg.candidates_per_step; ++c) {
      candidate.theta = run.best.theta;
      for (auto& t : candidate.theta) t += cfg.step_size * rng.normal();
      const double score = expected_accuracy(task, candidate, subset);
      if (score > step_score) {
        step_score = score;
        step_best = candidate;
      }
    }
    if (step_score > best_score) {
      best_score = step_score;
      run.best = std::move(step_best);
    }
    run.trajectory.push_back({best_score, expected_accuracy(task, run.best, everything)});
  }
  return run;
}

// ---------------------------------------------------------------------------
// Selector comparison

enum class Selector { Random, Rep, Lc, Wrep, Full };

constexpr std::string_view to_string(Selector s) {
  switch (s) {
    case Selector::Random: return "random";
    case Selector::Rep: return "rep";
    case Selector::Lc: return "lc";
    case Selector::Wrep: return "wrep";
    case Selector::Full: return "full";
  }
  return "?";
}

inline Selector parse_selector(std::string_view s) {
  for (auto sel : {Selector::Random, Selector::Rep, Selector::Lc, Selector::Wrep, Selector::Full})
    if (to_string(sel) == s) return sel;
  throw Error(ErrorCode::InvalidArgument, "unknown selector '" + std::string(s) + "'");
}

struct ComparisonConfig {
  TaskConfig task;
  std::size_t budget = 20;
  std::size_t repetitions = 16;
  OptimizerConfig optimizer;
  double lambda = 0.5;
  std::vector<Selector> selectors = {Selector::Random, Selector::Rep, Selector::Lc,
                                     Selector::Wrep, Selector::Full};
  unsigned threads = 1;
};

struct ComparisonRow {
  Selector selector;
  double mean_full = 0.0;
  double stdev_full = 0.0;
  double mean_subset = 0.0;
  std::vector<double> finals;  // final full-pool accuracy per repetition
};

struct ComparisonTable {
  ComparisonConfig config;
  std::vector<ComparisonRow> rows;

  const ComparisonRow* find(Selector s) const {
    for (const auto& r : rows)
      if (r.selector == s) return &r;
    return nullptr;
  }
};

/// Confidence under the all-zero probe prompt, sigmoid(-d_j), normalized
/// like scorer confidences.
inline ConfidenceVector probe_confidence(const SyntheticTask& task) {
  RawConfidence raw{ConfidenceSource::Loglik, std::vector<double>(task.size())};
  const SyntheticPrompt probe{std::vector<double>(task.dim, 0.0)};
  for (std::size_t j = 0; j < task.size(); ++j) raw.values[j] = success_probability(task, probe, j);
  return normalize(raw);
}

/// Subset chosen by `selector`. Only the random selector uses `seed`.
inline std::vector<std::size_t> select_subset(const SyntheticTask& task, Selector selector,
                                              std::size_t budget, double lambda,
                                              std::uint64_t seed) {
  const std::size_t n = task.size();
  if (budget == 0 || budget > n)
    throw Error(ErrorCode::BudgetExceedsPool, std::to_string(budget) + " vs pool " + std::to_string(n));
  SelectionConfig sc;
  sc.budget = budget;
  switch (selector) {
    case Selector::Full:
      return full_pool(task);
    case Selector::Random: {
      // Partial Fisher-Yates.
      auto all = full_pool(task);
      Rng rng(seed);
      for (std::size_t i = 0; i < budget; ++i) std::swap(all[i], all[i + rng.below(n - i)]);
      all.resize(budget);
      return all;
    }
    case Selector::Lc: {
      sc.algorithm = Algorithm::Topk;
      return topk_select(Objective::lc(probe_confidence(task)), sc).chosen;
    }
    case Selector::Rep:
    case Selector::Wrep: {
      auto simm = std::make_shared<SimilarityMatrix>(
          dense_similarity(EmbeddingTable(task.dim, task.features)));
      sc.algorithm = Algorithm::Lazy;
      auto objective = selector == Selector::Rep
                           ? Objective::rep(simm)
                           : Objective::wrep(simm, compute_weights(probe_confidence(task), lambda));
      return lazy_greedy_select(objective, sc).chosen;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown selector");
}

/// For every selector, runs the optimizer `repetitions` times on that
/// selector's subset and reports the full-pool accuracy of the prompt that
/// scored best on the subset. Repetition r uses the same optimizer seed for
/// every selector.
inline ComparisonTable compare_selectors(const ComparisonConfig& cfg) {
  if (cfg.repetitions == 0) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  if (cfg.budget == 0 || cfg.budget > cfg.task.pool_size)
    throw Error(ErrorCode::BudgetExceedsPool,
                std::to_string(cfg.budget) + " > " + std::to_string(cfg.task.pool_size));
  const auto task = make_task(cfg.task);
  const std::uint64_t subset_stream = split_seed(cfg.task.seed, 1);
  const std::uint64_t optimizer_stream = split_seed(cfg.task.seed, 2);

  ComparisonTable table;
  table.config = cfg;
  for (auto selector : cfg.selectors) {
    std::vector<std::vector<std::size_t>> subsets(cfg.repetitions);
    if (selector == Selector::Random) {
      for (std::size_t r = 0; r < cfg.repetitions; ++r)
        subsets[r] = select_subset(task, selector, cfg.budget, cfg.lambda, split_seed(subset_stream, r));
    } else {
      const auto shared = select_subset(task, selector, cfg.budget, cfg.lambda, 0);
      for (auto& s : subsets) s = shared;
    }
    ComparisonRow row{selector, 0.0, 0.0, 0.0, std::vector<double>(cfg.repetitions)};
    std::vector<double> subset_scores(cfg.repetitions);
    parallel_for(cfg.repetitions, cfg.threads, [&](std::size_t r) {
      const auto run = run_optimization(task, subsets[r], cfg.optimizer,
                                        split_seed(optimizer_stream, r));
      row.finals[r] = run.trajectory.back().full_score;
      subset_scores[r] = run.trajectory.back().subset_score;
    });
    const double reps = static_cast<double>(cfg.repetitions);
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      row.mean_full += row.finals[r];
      row.mean_subset += subset_scores[r];
    }
    row.mean_full /= reps;
    row.mean_subset /= reps;
    if (cfg.repetitions > 1) {
      double ss = 0.0;
      for (double f : row.finals) ss += (f - row.mean_full) * (f - row.mean_full);
      row.stdev_full = std::sqrt(ss / (reps - 1.0));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline nlohmann::ordered_json to_json(const ComparisonTable& t) {
  const auto& c = t.config;
  nlohmann::ordered_json out;
  out["scenario"] = {{"pool_size", c.task.pool_size},
                     {"dim", c.task.dim},
                     {"clusters", c.task.clusters},
                     {"budget", c.budget},
                     {"repetitions", c.repetitions},
                     {"seed", c.task.seed},
                     {"steps", c.optimizer.steps},
                     {"candidates_per_step", c.optimizer.candidates_per_step},
                     {"step_size", c.optimizer.step_size},
                     {"lambda", c.lambda}};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"selector", std::string(to_string(r.selector))},
                    {"mean_full_accuracy", r.mean_full},
                    {"stdev_full_accuracy", r.stdev_full},
                    {"mean_subset_accuracy", r.mean_subset},
                    {"final_full_accuracy", r.finals}});
  }
  out["rows"] = std::move(rows);
  return out;
}

inline std::string to_csv(const ComparisonTable& t) {
  std::string csv = "selector,mean_full_accuracy,stdev_full_accuracy,mean_subset_accuracy\n";
  for (const auto& r : t.rows) {
    csv += std::string(to_string(r.selector)) + "," + nlohmann::json(r.mean_full).dump() + "," +
           nlohmann::json(r.stdev_full).dump() + "," + nlohmann::json(r.mean_subset).dump() + "\n";
  }
  return csv;
}

}  // namespace sess::sim

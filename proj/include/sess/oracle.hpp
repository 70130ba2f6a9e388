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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sess/confidence.hpp"
#include "sess/error.hpp"
#include "sess/objectives.hpp"
#include "sess/parallel.hpp"
#include "sess/random.hpp"
#include "sess/similarity.hpp"

namespace sess {

inline constexpr double kProofTolerance = 1e-12;
inline constexpr double kComposedTolerance = 1e-9;
inline constexpr double kBruteForceLimit = 1e7;

/// Exact optimum over all size-k subsets. Returns the lexicographically
/// smallest maximizer.
struct Optimum {
  Subset subset;
  double value = 0.0;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

inline Optimum brute_force_optimum(const Objective& objective, std::size_t k) {
  const std::size_t n = objective.size();
  if (k > n) throw Error(ErrorCode::BudgetExceedsPool, std::to_string(k) + " > " + std::to_string(n));
  if (binomial(n, k) > kBruteForceLimit)
    throw Error(ErrorCode::InstanceTooLarge, "N=" + std::to_string(n) + ", k=" + std::to_string(k));
  std::vector<std::size_t> combo(k);
  for (std::size_t i = 0; i < k; ++i) combo[i] = i;
  Optimum best{Subset(combo), objective.evaluate(Subset(combo))};
  while (true) {
    // Advance to the next combination in lexicographic order.
    std::size_t i = k;
    while (i > 0 && combo[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
    Subset s(combo);
    const double v = objective.evaluate(s);
    if (v > best.value) best = {std::move(s), v};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Random instances

enum class InstanceMode {
  /// sim = (1 + cos) / 2 of random Gaussian vectors.
  UnitVectors,
  /// Independent uniform [0, 1] entries, mirrored to be symmetric.
  ArbitrarySymmetric,
};

inline SimilarityMatrix random_similarity(std::size_t n, InstanceMode mode, Rng& rng) {
  if (mode == InstanceMode::UnitVectors) {
    const std::size_t dim = 2 + rng.below(5);
    std::vector<double> values(n * dim);
    for (auto& v : values) v = rng.normal();
    return dense_similarity(EmbeddingTable(dim, std::move(values)));
  }
  std::vector<double> entries(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) entries[i * n + j] = entries[j * n + i] = rng.uniform();
  return SimilarityMatrix(n, std::move(entries));
}

/// Uniform confidences with occasional exact 0 and 1 values.
inline ConfidenceVector random_confidence(std::size_t n, Rng& rng) {
  ConfidenceVector c;
  c.values.resize(n);
  for (auto& v : c.values) {
    const auto r = rng.below(10);
    v = r == 0 ? 0.0 : r == 1 ? 1.0 : rng.uniform();
  }
  return c;
}

inline Objective random_objective(ObjectiveKind kind, std::size_t n, InstanceMode mode, Rng& rng) {
  switch (kind) {
    case ObjectiveKind::Rep:
      return Objective::rep(std::make_shared<SimilarityMatrix>(random_similarity(n, mode, rng)));
    case ObjectiveKind::Lc:
      return Objective::lc(random_confidence(n, rng));
    case ObjectiveKind::Wrep: {
      auto sim = std::make_shared<SimilarityMatrix>(random_similarity(n, mode, rng));
      const auto r = rng.below(4);
      const double lambda = r == 0 ? 0.0 : r == 1 ? 1.0 : rng.uniform();
      return Objective::wrep(std::move(sim), compute_weights(random_confidence(n, rng), lambda));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown objective kind");
}

/// Each element joins with probability 1/2.
inline std::vector<std::size_t> random_subset_of(std::span<const std::size_t> from, Rng& rng) {
  std::vector<std::size_t> out;
  for (auto x : from)
    if (rng.coin()) out.push_back(x);
  return out;
}

// ---------------------------------------------------------------------------
// Property checks

struct PropertyReport {
  std::string property;  // "submodularity" or "monotonicity"
  std::string kind;
  std::size_t trials = 0;
  std::size_t violations = 0;
  /// Largest amount by which the inequality failed; 0 when it always held.
  double worst_violation = 0.0;
  std::uint64_t seed = 0;
  double tolerance = kProofTolerance;
};

inline nlohmann::ordered_json to_json(const PropertyReport& r) {
  return {{"property", r.property},   {"kind", r.kind},
          {"trials", r.trials},       {"violations", r.violations},
          {"worst_violation", r.worst_violation}, {"seed", r.seed},
          {"tolerance", r.tolerance}};
}

struct PropertyOptions {
  std::size_t min_n = 2;
  std::size_t max_n = 12;
  unsigned threads = 1;
  double tolerance = kProofTolerance;
};

namespace detail {

inline void check_property_options(const PropertyOptions& opt) {
  if (opt.min_n < 2 || opt.max_n < opt.min_n || opt.max_n > 20)
    throw Error(ErrorCode::InvalidArgument, "instance sizes must satisfy 2 <= min_n <= max_n <= 20");
}

// Excess of the diminishing-returns inequality on one sampled triple
// (A subset of B, x not in B). Positive means B gained more than A.
inline double submodularity_excess(const Objective& f, Rng& rng) {
  const std::size_t n = f.size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const std::size_t x = rng.below(n);
  std::vector<std::size_t> rest;
  for (auto i : all)
    if (i != x) rest.push_back(i);
  const Subset b(random_subset_of(rest, rng));
  const Subset a(random_subset_of(b.positions(), rng));
  const double gain_a = f.evaluate(a.with(x)) - f.evaluate(a);
  const double gain_b = f.evaluate(b.with(x)) - f.evaluate(b);
  return gain_b - gain_a;
}

// Excess of F(S) over F(T) for a sampled pair S subset of T.
inline double monotonicity_excess(const Objective& f, Rng& rng) {
  std::vector<std::size_t> all(f.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Subset t(random_subset_of(all, rng));
  const Subset s(random_subset_of(t.positions(), rng));
  return f.evaluate(s) - f.evaluate(t);
}

template <class Trial>
PropertyReport run_trials(std::string property, std::string kind, std::size_t trials,
                          std::uint64_t seed, unsigned threads, double tolerance, Trial&& trial) {
  // Trial t draws only from its own stream, so the schedule cannot leak into
  // the report.
  std::vector<double> excess(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    Rng rng(split_seed(seed, t));
    excess[t] = trial(rng, t);
  });
  PropertyReport r{std::move(property), std::move(kind), trials, 0, 0.0, seed, tolerance};
  for (double e : excess) {
    if (e > tolerance) ++r.violations;
    r.worst_violation = std::max(r.worst_violation, e);
  }
  return r;
}

}  // namespace detail

/// Samples random instances of `kind` (alternating the two similarity
/// regimes) and checks F(A + x) - F(A) >= F(B + x) - F(B) - tol.
inline PropertyReport check_submodularity(ObjectiveKind kind, std::size_t trials,
                                          std::uint64_t seed, const PropertyOptions& opt = {}) {
  detail::check_property_options(opt);
  return detail::run_trials(
      "submodularity", std::string(to_string(kind)), trials, seed, opt.threads, opt.tolerance,
      [&](Rng& rng, std::size_t t) {
        const std::size_t n = opt.min_n + rng.below(opt.max_n - opt.min_n + 1);
        const auto mode = t % 2 == 0 ? InstanceMode::UnitVectors : InstanceMode::ArbitrarySymmetric;
        return detail::submodularity_excess(random_objective(kind, n, mode, rng), rng);
      });
}

/// Same check against one fixed objective, e.g. a deliberately invalid one.
inline PropertyReport check_submodularity(const Objective& objective, std::size_t trials,
                                          std::uint64_t seed, unsigned threads = 1,
                                          double tolerance = kProofTolerance) {
  return detail::run_trials("submodularity", std::string(to_string(objective.kind())), trials,
                            seed, threads, tolerance, [&](Rng& rng, std::size_t) {
                              return detail::submodularity_excess(objective, rng);
                            });
}

/// Checks F(S) <= F(T) + tol for random S subset of T.
inline PropertyReport check_monotonicity(ObjectiveKind kind, std::size_t trials,
                                         std::uint64_t seed, const PropertyOptions& opt = {}) {
  detail::check_property_options(opt);
  return detail::run_trials(
      "monotonicity", std::string(to_string(kind)), trials, seed, opt.threads, opt.tolerance,
      [&](Rng& rng, std::size_t t) {
        const std::size_t n = opt.min_n + rng.below(opt.max_n - opt.min_n + 1);
        const auto mode = t % 2 == 0 ? InstanceMode::UnitVectors : InstanceMode::ArbitrarySymmetric;
        return detail::monotonicity_excess(random_objective(kind, n, mode, rng), rng);
      });
}

inline PropertyReport check_monotonicity(const Objective& objective, std::size_t trials,
                                         std::uint64_t seed, unsigned threads = 1,
                                         double tolerance = kProofTolerance) {
  return detail::run_trials("monotonicity", std::string(to_string(objective.kind())), trials,
                            seed, threads, tolerance, [&](Rng& rng, std::size_t) {
                              return detail::monotonicity_excess(objective, rng);
                            });
}

}  // namespace sess

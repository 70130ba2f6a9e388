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
#include <chrono>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sess/corpus.hpp"
#include "sess/error.hpp"
#include "sess/objectives.hpp"
#include "sess/parallel.hpp"

namespace sess {

enum class Algorithm { Naive, Lazy, Topk };

constexpr std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Naive: return "naive";
    case Algorithm::Lazy: return "lazy";
    case Algorithm::Topk: return "topk";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "naive") return Algorithm::Naive;
  if (s == "lazy") return Algorithm::Lazy;
  if (s == "topk") return Algorithm::Topk;
  throw Error(ErrorCode::InvalidConfig, "unknown algorithm '" + std::string(s) + "'");
}

struct SelectionConfig {
  std::size_t budget = 0;
  Algorithm algorithm = Algorithm::Lazy;
  /// Worker cap for the candidate scan; 0 means hardware concurrency. Never
  /// affects the result.
  unsigned threads = 1;
  /// Echoed into results. "rep", "lc", "vlc" or "wrep".
  std::string objective_label;
  double alpha = 0.7;
  double lambda = 0.5;
};

struct SelectionResult {
  std::vector<std::size_t> chosen;  // in pick order
  std::vector<double> gains;        // gain of each pick at the time it was made
  double final_value = 0.0;
  SelectionConfig config;
  double wall_time_seconds = 0.0;
};

namespace detail {

inline void check_budget(const Objective& objective, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "budget must be positive");
  if (k > objective.size())
    throw Error(ErrorCode::BudgetExceedsPool,
                std::to_string(k) + " > " + std::to_string(objective.size()));
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline SelectionResult finish(const Objective& objective, const SelectionConfig& config,
                              std::vector<std::size_t> chosen, std::vector<double> gains,
                              const Stopwatch& clock) {
  SelectionResult r;
  r.final_value = objective.evaluate(Subset(chosen));
  r.chosen = std::move(chosen);
  r.gains = std::move(gains);
  r.config = config;
  r.wall_time_seconds = clock.seconds();
  return r;
}

}  // namespace detail

/// Plain greedy: each step scans every remaining candidate and keeps the
/// largest marginal gain, lowest position on ties.
inline SelectionResult greedy_select(const Objective& objective, const SelectionConfig& config) {
  detail::Stopwatch clock;
  detail::check_budget(objective, config.budget);
  const std::size_t n = objective.size();
  GreedyState state(objective);
  std::vector<double> gains(n);
  std::vector<double> picked_gains;
  for (std::size_t step = 0; step < config.budget; ++step) {
    parallel_for(n, config.threads, [&](std::size_t x) {
      gains[x] = state.selected(x) ? -std::numeric_limits<double>::infinity()
                                   : state.gain_unchecked(x);
    });
    std::size_t best = n;
    for (std::size_t x = 0; x < n; ++x)
      if (!state.selected(x) && (best == n || gains[x] > gains[best])) best = x;
    picked_gains.push_back(state.add(best));
  }
  return detail::finish(objective, config, std::vector<std::size_t>(state.picks().begin(),
                                                                    state.picks().end()),
                        std::move(picked_gains), clock);
}

/// Lazy greedy. Cached gains are upper bounds on current gains (by
/// submodularity), so a candidate whose refreshed gain still tops the queue
/// is the greedy pick. Queue order is (gain desc, position asc), which
/// reproduces the plain greedy tie-break exactly.
inline SelectionResult lazy_greedy_select(const Objective& objective,
                                          const SelectionConfig& config) {
  detail::Stopwatch clock;
  detail::check_budget(objective, config.budget);
  const std::size_t n = objective.size();
  GreedyState state(objective);

  struct Entry {
    double bound;
    std::size_t pos;
    std::size_t fresh_at;  // step at which bound was computed
  };
  const auto lower = [](const Entry& a, const Entry& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.pos > b.pos;
  };
  std::vector<double> initial(n);
  parallel_for(n, config.threads, [&](std::size_t x) { initial[x] = state.gain_unchecked(x); });
  std::vector<Entry> heap;
  heap.reserve(n);
  for (std::size_t x = 0; x < n; ++x) heap.push_back({initial[x], x, 0});
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower)> queue(lower, std::move(heap));

  std::vector<double> picked_gains;
  for (std::size_t step = 0; step < config.budget; ++step) {
    while (true) {
      Entry top = queue.top();
      queue.pop();
      if (top.fresh_at == step) {
        const double gain = state.add(top.pos);
        picked_gains.push_back(gain);
        break;
      }
      top.bound = state.gain_unchecked(top.pos);
      top.fresh_at = step;
      queue.push(top);
    }
  }
  return detail::finish(objective, config, std::vector<std::size_t>(state.picks().begin(),
                                                                    state.picks().end()),
                        std::move(picked_gains), clock);
}

/// Modular shortcut for the least-confidence objective: the k largest
/// uncertainties, lowest position on ties.
inline SelectionResult topk_select(const Objective& objective, const SelectionConfig& config) {
  detail::Stopwatch clock;
  if (!objective.modular())
    throw Error(ErrorCode::InvalidConfig, "topk requires the lc objective");
  detail::check_budget(objective, config.budget);
  std::vector<std::size_t> order(objective.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return objective.uncertainty(a) > objective.uncertainty(b);
  });
  order.resize(config.budget);
  std::vector<double> gains;
  for (auto x : order) gains.push_back(objective.uncertainty(x));
  return detail::finish(objective, config, std::move(order), std::move(gains), clock);
}

inline SelectionResult topk_select(const ConfidenceVector& conf, std::size_t k) {
  SelectionConfig config;
  config.budget = k;
  config.algorithm = Algorithm::Topk;
  config.objective_label = "lc";
  return topk_select(Objective::lc(conf), config);
}

inline SelectionResult select(const Objective& objective, const SelectionConfig& config) {
  switch (config.algorithm) {
    case Algorithm::Naive: return greedy_select(objective, config);
    case Algorithm::Lazy: return lazy_greedy_select(objective, config);
    case Algorithm::Topk: return topk_select(objective, config);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown algorithm");
}

/// Result document. Wall time and thread count are left out so the output
/// depends only on the inputs.
inline nlohmann::ordered_json to_json(const SelectionResult& r, const Pool& pool) {
  nlohmann::ordered_json out;
  out["objective"] = r.config.objective_label;
  out["k"] = r.config.budget;
  out["alpha"] = r.config.alpha;
  out["lambda"] = r.config.lambda;
  out["algorithm"] = std::string(to_string(r.config.algorithm));
  auto ids = nlohmann::ordered_json::array();
  for (auto pos : r.chosen) ids.push_back(pool[pos].id);
  out["selected_ids"] = std::move(ids);
  out["gains"] = r.gains;
  out["objective_value"] = r.final_value;
  return out;
}

}  // namespace sess

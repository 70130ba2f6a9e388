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
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sess/confidence.hpp"
#include "sess/error.hpp"
#include "sess/similarity.hpp"

namespace sess {

enum class ObjectiveKind { Rep, Lc, Wrep };

constexpr std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Rep: return "rep";
    case ObjectiveKind::Lc: return "lc";
    case ObjectiveKind::Wrep: return "wrep";
  }
  return "?";
}

/// A sorted list of distinct pool positions.
class Subset {
 public:
  Subset() = default;
  Subset(std::initializer_list<std::size_t> positions)
      : Subset(std::vector<std::size_t>(positions)) {}
  explicit Subset(std::vector<std::size_t> positions) : positions_(std::move(positions)) {
    std::sort(positions_.begin(), positions_.end());
    if (std::adjacent_find(positions_.begin(), positions_.end()) != positions_.end())
      throw Error(ErrorCode::InvalidArgument, "subset has duplicate positions");
  }

  std::size_t size() const noexcept { return positions_.size(); }
  bool empty() const noexcept { return positions_.empty(); }
  bool contains(std::size_t pos) const {
    return std::binary_search(positions_.begin(), positions_.end(), pos);
  }
  std::span<const std::size_t> positions() const noexcept { return positions_; }
  auto begin() const { return positions_.begin(); }
  auto end() const { return positions_.end(); }

  Subset with(std::size_t pos) const {
    auto p = positions_;
    p.push_back(pos);
    return Subset(std::move(p));
  }

  friend bool operator==(const Subset&, const Subset&) = default;

 private:
  std::vector<std::size_t> positions_;
};

/// One of the three set functions over a pool of size N:
///   rep:  sum_j max_{i in S} sim(i, j)
///   lc:   sum_{j in S} (1 - c~(j))
///   wrep: sum_j w(j) * max_{i in S} sim(i, j)
/// F(empty) = 0 for all of them. Inputs are shared and immutable, so copies
/// are cheap and safe to use from several threads.
class Objective {
 public:
  static Objective rep(std::shared_ptr<const SimilarityMatrix> sim) {
    Objective o(ObjectiveKind::Rep);
    o.n_ = sim->size();
    o.sim_ = std::move(sim);
    return o;
  }

  static Objective lc(ConfidenceVector conf) {
    for (double c : conf.values)
      if (!(c >= 0.0 && c <= 1.0))
        throw Error(ErrorCode::InvalidConfidence, "normalized confidence outside [0,1]");
    Objective o(ObjectiveKind::Lc);
    o.n_ = conf.size();
    auto uncertainty = std::make_shared<std::vector<double>>(conf.size());
    for (std::size_t j = 0; j < conf.size(); ++j) (*uncertainty)[j] = 1.0 - conf[j];
    o.uncertainty_ = std::move(uncertainty);
    return o;
  }

  static Objective wrep(std::shared_ptr<const SimilarityMatrix> sim, const WeightVector& w) {
    if (sim->size() != w.size())
      throw Error(ErrorCode::SizeMismatch, "similarity is " + std::to_string(sim->size()) +
                                               ", weights are " + std::to_string(w.size()));
    for (double x : w.values)
      if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative weight");
    Objective o(ObjectiveKind::Wrep);
    o.n_ = sim->size();
    o.sim_ = std::move(sim);
    o.weights_ = std::make_shared<std::vector<double>>(w.values);
    return o;
  }

  ObjectiveKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return n_; }
  /// True when the gain of an element does not depend on the current set.
  bool modular() const noexcept { return kind_ == ObjectiveKind::Lc; }

  const SimilarityMatrix& similarity() const { return *sim_; }
  double uncertainty(std::size_t j) const { return (*uncertainty_)[j]; }
  double weight(std::size_t j) const { return weights_ ? (*weights_)[j] : 1.0; }

  /// Evaluates F(S) directly from the definition. Sums run over ascending j.
  double evaluate(const Subset& s) const {
    for (auto i : s)
      if (i >= n_) throw Error(ErrorCode::IndexOutOfRange, std::to_string(i));
    if (s.empty()) return 0.0;
    if (kind_ == ObjectiveKind::Lc) {
      double total = 0.0;
      for (auto i : s) total += (*uncertainty_)[i];
      return total;
    }
    std::vector<double> best(n_, 0.0);
    bool first = true;
    for (auto i : s) {
      const auto row = sim_->row(i);
      for (std::size_t j = 0; j < n_; ++j) best[j] = first ? row[j] : std::max(best[j], row[j]);
      first = false;
    }
    double total = 0.0;
    if (kind_ == ObjectiveKind::Rep) {
      for (std::size_t j = 0; j < n_; ++j) total += best[j];
    } else {
      for (std::size_t j = 0; j < n_; ++j) total += (*weights_)[j] * best[j];
    }
    return total;
  }

 private:
  explicit Objective(ObjectiveKind kind) : kind_(kind) {}

  ObjectiveKind kind_;
  std::size_t n_ = 0;
  std::shared_ptr<const SimilarityMatrix> sim_;
  std::shared_ptr<const std::vector<double>> uncertainty_;
  std::shared_ptr<const std::vector<double>> weights_;
};

inline double eval_rep(const SimilarityMatrix& sim, const Subset& s) {
  return Objective::rep(std::make_shared<SimilarityMatrix>(sim)).evaluate(s);
}

inline double eval_lc(const ConfidenceVector& conf, const Subset& s) {
  return Objective::lc(conf).evaluate(s);
}

inline double eval_wrep(const SimilarityMatrix& sim, const WeightVector& w, const Subset& s) {
  return Objective::wrep(std::make_shared<SimilarityMatrix>(sim), w).evaluate(s);
}

/// Incremental greedy bookkeeping: the chosen set plus the cover vector
/// a_j = max_{i in S} sim(i, j), which is 0 while S is empty.
class GreedyState {
 public:
  explicit GreedyState(const Objective& objective)
      : objective_(&objective),
        cover_(objective.modular() ? 0 : objective.size(), 0.0),
        selected_(objective.size(), false) {}

  const Objective& objective() const noexcept { return *objective_; }
  std::span<const double> cover() const noexcept { return cover_; }
  std::span<const std::size_t> picks() const noexcept { return picks_; }
  Subset subset() const { return Subset(picks_); }
  double objective_value() const noexcept { return value_; }
  bool selected(std::size_t x) const { return selected_[x]; }
  std::size_t size() const noexcept { return picks_.size(); }

  /// F(S + x) - F(S) in O(N) from the cover vector. No bounds or
  /// membership checks; callers in hot loops guarantee both.
  double gain_unchecked(std::size_t x) const {
    const auto& obj = *objective_;
    switch (obj.kind()) {
      case ObjectiveKind::Lc:
        return obj.uncertainty(x);
      case ObjectiveKind::Rep: {
        const auto row = obj.similarity().row(x);
        double total = 0.0;
        for (std::size_t j = 0; j < cover_.size(); ++j)
          total += std::max(row[j] - cover_[j], 0.0);
        return total;
      }
      case ObjectiveKind::Wrep: {
        const auto row = obj.similarity().row(x);
        double total = 0.0;
        for (std::size_t j = 0; j < cover_.size(); ++j)
          total += obj.weight(j) * std::max(row[j] - cover_[j], 0.0);
        return total;
      }
    }
    return 0.0;
  }

  double marginal_gain(std::size_t x) const {
    if (x >= selected_.size()) throw Error(ErrorCode::IndexOutOfRange, std::to_string(x));
    if (selected_[x]) throw Error(ErrorCode::AlreadySelected, std::to_string(x));
    return gain_unchecked(x);
  }

  /// Adds x and returns the gain it contributed.
  double add(std::size_t x) {
    const double gain = marginal_gain(x);
    if (!objective_->modular()) {
      const auto row = objective_->similarity().row(x);
      for (std::size_t j = 0; j < cover_.size(); ++j) cover_[j] = std::max(cover_[j], row[j]);
    }
    selected_[x] = true;
    picks_.push_back(x);
    value_ += gain;
    return gain;
  }

 private:
  const Objective* objective_;
  std::vector<double> cover_;
  std::vector<bool> selected_;
  std::vector<std::size_t> picks_;
  double value_ = 0.0;
};

inline double marginal_gain(const GreedyState& state, std::size_t x) {
  return state.marginal_gain(x);
}

}  // namespace sess

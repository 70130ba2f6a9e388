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

#include <memory>

#include <gtest/gtest.h>

#include "sess/objectives.hpp"
#include "sess/oracle.hpp"

namespace sess {
namespace {

std::shared_ptr<SimilarityMatrix> example_sim() {
  return std::make_shared<SimilarityMatrix>(
      3, std::vector<double>{1, .8, .2, .8, 1, .4, .2, .4, 1});
}

// Straight from the definition, written independently of Objective.
double reference_value(const SimilarityMatrix& sim, const std::vector<double>& w, const Subset& s) {
  if (s.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < sim.size(); ++j) {
    double best = -1e300;
    for (auto i : s) best = std::max(best, sim(i, j));
    total += w[j] * best;
  }
  return total;
}

TEST(EvalRep, HandExamples) {
  const auto sim = example_sim();
  EXPECT_NEAR(eval_rep(*sim, {0}), 2.0, 1e-12);
  EXPECT_NEAR(eval_rep(*sim, {1, 2}), 2.8, 1e-12);
  EXPECT_EQ(eval_rep(*sim, {0, 1, 2}), 3.0);
  EXPECT_EQ(eval_rep(*sim, {}), 0.0);
  try {
    eval_rep(*sim, {3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
}

TEST(EvalLc, HandExamples) {
  const ConfidenceVector conf{{0.9, 0.1, 0.5}};
  EXPECT_NEAR(eval_lc(conf, {1}), 0.9, 1e-15);
  EXPECT_NEAR(eval_lc(conf, {0, 1, 2}), 1.5, 1e-15);
  EXPECT_EQ(eval_lc(ConfidenceVector{{1, 1, 1}}, {0, 2}), 0.0);
  EXPECT_EQ(eval_lc(conf, {}), 0.0);
}

TEST(EvalWrep, HandExamples) {
  const auto sim = example_sim();
  const WeightVector w{{1, 0.5, 1}, 0.5};
  EXPECT_NEAR(eval_wrep(*sim, w, {1}), 1.7, 1e-12);
  const WeightVector zeros{{0, 0, 0}, 1.0};
  EXPECT_EQ(eval_wrep(*sim, zeros, {0, 2}), 0.0);
  const WeightVector ones{{1, 1, 1}, 0.0};
  for (const Subset& s : {Subset{0}, Subset{1, 2}, Subset{0, 1, 2}})
    EXPECT_EQ(eval_wrep(*sim, ones, s), eval_rep(*sim, s));
  EXPECT_THROW(eval_wrep(*sim, WeightVector{{1, 1}, 0.0}, {0}), Error);
}

TEST(EvalRep, MatchesReferenceOnRandomInstances) {
  Rng rng(21);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.below(15);
    const auto sim = random_similarity(n, t % 2 ? InstanceMode::UnitVectors : InstanceMode::ArbitrarySymmetric, rng);
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const Subset s(random_subset_of(all, rng));
    const auto conf = random_confidence(n, rng);
    const auto w = compute_weights(conf, rng.uniform());
    EXPECT_NEAR(eval_rep(sim, s), reference_value(sim, std::vector<double>(n, 1.0), s), 1e-12);
    EXPECT_NEAR(eval_wrep(sim, w, s), reference_value(sim, w.values, s), 1e-12);
  }
}

TEST(MarginalGain, CoverExample) {
  const auto obj = Objective::rep(example_sim());
  GreedyState state(obj);
  state.add(1);
  EXPECT_EQ(std::vector<double>(state.cover().begin(), state.cover().end()),
            (std::vector<double>{.8, 1, .4}));
  EXPECT_NEAR(marginal_gain(state, 2), 0.6, 1e-12);
  EXPECT_NEAR(marginal_gain(state, 2), eval_rep(*example_sim(), {1, 2}) - eval_rep(*example_sim(), {1}),
              1e-12);
  try {
    marginal_gain(state, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AlreadySelected);
  }
}

TEST(MarginalGain, DominatedCandidateGainsNothing) {
  // Row 1 is dominated by row 0 everywhere.
  const auto obj = Objective::rep(std::make_shared<SimilarityMatrix>(
      3, std::vector<double>{1, 1, .5, 1, 1, .3, .5, .3, 1}));
  GreedyState state(obj);
  state.add(0);
  EXPECT_EQ(marginal_gain(state, 1), 0.0);
}

TEST(MarginalGain, LcIsModular) {
  const auto obj = Objective::lc(ConfidenceVector{{0.3, 0.9, 0.5}});
  GreedyState state(obj);
  EXPECT_NEAR(marginal_gain(state, 0), 0.7, 1e-15);
  state.add(2);
  state.add(1);
  EXPECT_NEAR(marginal_gain(state, 0), 0.7, 1e-15);
}

TEST(MarginalGain, ConsistentWithDifferenceOfValues) {
  Rng rng(33);
  for (int t = 0; t < 400; ++t) {
    const auto kind = static_cast<ObjectiveKind>(t % 3);
    const std::size_t n = 2 + rng.below(14);
    const auto obj = random_objective(kind, n, t % 2 ? InstanceMode::UnitVectors : InstanceMode::ArbitrarySymmetric, rng);
    GreedyState state(obj);
    const std::size_t picks = rng.below(n);
    for (std::size_t p = 0; p < picks; ++p) {
      std::size_t x;
      do x = rng.below(n); while (state.selected(x));
      state.add(x);
    }
    EXPECT_NEAR(state.objective_value(), obj.evaluate(state.subset()), 1e-9);
    for (std::size_t x = 0; x < n; ++x) {
      if (state.selected(x)) continue;
      const auto s = state.subset();
      EXPECT_NEAR(marginal_gain(state, x), obj.evaluate(s.with(x)) - obj.evaluate(s), 1e-9);
    }
  }
}

TEST(Objectives, NonNegativeOnValidInputs) {
  Rng rng(44);
  for (int t = 0; t < 300; ++t) {
    const auto kind = static_cast<ObjectiveKind>(t % 3);
    const std::size_t n = 1 + rng.below(12);
    const auto obj = random_objective(kind, n, InstanceMode::UnitVectors, rng);
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    EXPECT_GE(obj.evaluate(Subset(random_subset_of(all, rng))), 0.0);
  }
}

TEST(Objectives, LambdaZeroWeightsReproduceRepExactly) {
  Rng rng(55);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(12);
    auto sim = std::make_shared<SimilarityMatrix>(random_similarity(n, InstanceMode::UnitVectors, rng));
    const auto rep = Objective::rep(sim);
    const auto wrep = Objective::wrep(sim, compute_weights(random_confidence(n, rng), 0.0));
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const Subset s(random_subset_of(all, rng));
    EXPECT_EQ(rep.evaluate(s), wrep.evaluate(s));
  }
}

TEST(Subset, SortsAndRejectsDuplicates) {
  const Subset s({3, 1, 2});
  EXPECT_EQ(std::vector<std::size_t>(s.begin(), s.end()), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_TRUE(s.contains(2));
  EXPECT_THROW(Subset({1, 1}), Error);
}

}  // namespace
}  // namespace sess

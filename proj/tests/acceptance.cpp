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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "golden_verbal.hpp"
#include "json.hpp"
#include "sess/sess.hpp"
#include "test_util.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using sess::testing::read_file;

const std::string kGolden = SESS_GOLDEN_DIR;
const std::string kCli = SESS_CLI_PATH;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Runs the CLI and returns {exit code, stdout}.
std::pair<int, std::string> run_cli(const sess::testing::TempDir& dir, const std::string& args) {
  const auto out = dir.file("cli_stdout.txt");
  const int status = std::system((kCli + " " + args + " >" + out + " 2>" + dir.file("cli_stderr.txt")).c_str());
  return {WEXITSTATUS(status), read_file(out)};
}

constexpr sess::ObjectiveKind kKinds[] = {sess::ObjectiveKind::Rep, sess::ObjectiveKind::Lc,
                                          sess::ObjectiveKind::Wrep};

Outcome proof_check() {
  const auto t0 = Clock::now();
  sess::PropertyOptions opt;
  opt.tolerance = sess::kProofTolerance;
  opt.threads = 0;
  std::size_t violations = 0, trials = 0;
  double worst = 0.0;
  for (auto kind : kKinds) {
    for (const auto& r : {sess::check_submodularity(kind, 1000, 1, opt),
                          sess::check_monotonicity(kind, 1000, 2, opt)}) {
      violations += r.violations;
      trials += r.trials;
      worst = std::max(worst, r.worst_violation);
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 30.0,
          fmt("%zu trials, %zu violations, worst excess %.3g, %.2f s", trials, violations, worst, secs)};
}

// Instances come from both generator regimes, with every objective kind.
Outcome greedy_guarantee() {
  const auto t0 = Clock::now();
  const double bound = 1.0 - std::exp(-1.0);
  constexpr std::size_t instances = 600;
  sess::Rng rng(11);
  std::size_t near_optimal = 0, below_bound = 0;
  std::size_t near_by_mode[2] = {0, 0}, count_by_mode[2] = {0, 0};
  double worst = 1.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto kind = kKinds[t % 3];
    const int unit = static_cast<int>(t % 2);
    const auto mode = unit ? sess::InstanceMode::UnitVectors : sess::InstanceMode::ArbitrarySymmetric;
    const std::size_t n = 4 + rng.below(9);
    const std::size_t k = 1 + rng.below(4);
    const auto f = sess::random_objective(kind, n, mode, rng);
    sess::SelectionConfig cfg;
    cfg.budget = k;
    const double greedy = sess::lazy_greedy_select(f, cfg).final_value;
    const double opt = sess::brute_force_optimum(f, k).value;
    const double ratio = opt > 0.0 ? greedy / opt : 1.0;
    worst = std::min(worst, ratio);
    if (greedy < bound * opt - 1e-9) ++below_bound;
    ++count_by_mode[unit];
    if (ratio >= 0.99) {
      ++near_optimal;
      ++near_by_mode[unit];
    }
  }
  const double secs = seconds_since(t0);
  const double share = static_cast<double>(near_optimal) / instances;
  const auto pct = [&](int m) { return 100.0 * near_by_mode[m] / count_by_mode[m]; };
  return {below_bound == 0 && share >= 0.95 && secs < 120.0,
          fmt("%zu instances, %zu below 1-1/e, worst ratio %.4f, %.1f%% >= 0.99 "
              "(unit vectors %.1f%%, arbitrary symmetric %.1f%%), %.2f s",
              instances, below_bound, worst, 100.0 * share, pct(1), pct(0), secs)};
}

Outcome lazy_equals_naive() {
  constexpr std::size_t instances = 600;
  sess::Rng rng(12);
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto kind = kKinds[t % 3];
    const auto mode = t % 2 ? sess::InstanceMode::UnitVectors : sess::InstanceMode::ArbitrarySymmetric;
    const std::size_t n = 2 + rng.below(59);
    const auto f = sess::random_objective(kind, n, mode, rng);
    sess::SelectionConfig cfg;
    cfg.budget = 1 + rng.below(n);
    const auto naive = sess::greedy_select(f, cfg);
    const auto lazy = sess::lazy_greedy_select(f, cfg);
    if (naive.chosen != lazy.chosen || naive.gains != lazy.gains) ++mismatches;
  }
  return {mismatches == 0, fmt("%zu instances, %zu mismatches", instances, mismatches)};
}

Outcome lambda_zero_reduction() {
  constexpr std::size_t instances = 200;
  sess::Rng rng(13);
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t n = 2 + rng.below(79);
    const auto mode = t % 2 ? sess::InstanceMode::UnitVectors : sess::InstanceMode::ArbitrarySymmetric;
    auto sim = std::make_shared<sess::SimilarityMatrix>(sess::random_similarity(n, mode, rng));
    const auto conf = sess::random_confidence(n, rng);
    const auto rep = sess::Objective::rep(sim);
    const auto wrep = sess::Objective::wrep(sim, sess::compute_weights(conf, 0.0));
    sess::SelectionConfig cfg;
    cfg.budget = 1 + rng.below(n);
    for (auto algo : {sess::Algorithm::Naive, sess::Algorithm::Lazy}) {
      cfg.algorithm = algo;
      const auto a = sess::select(rep, cfg), b = sess::select(wrep, cfg);
      if (a.chosen != b.chosen || a.gains != b.gains) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%zu instances x 2 algorithms, %zu mismatches", instances, mismatches)};
}

Outcome marginal_gain_consistency() {
  constexpr std::size_t probes = 20000;
  sess::Rng rng(14);
  double worst = 0.0;
  std::size_t done = 0;
  while (done < probes) {
    const auto kind = kKinds[done % 3];
    const auto mode = done % 2 ? sess::InstanceMode::UnitVectors : sess::InstanceMode::ArbitrarySymmetric;
    const std::size_t n = 2 + rng.below(30);
    const auto f = sess::random_objective(kind, n, mode, rng);
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    const auto s = sess::random_subset_of(all, rng);
    if (s.size() == n) continue;
    sess::GreedyState state(f);
    for (auto x : s) state.add(x);
    const sess::Subset subset(s);
    const double base = f.evaluate(subset);
    for (std::size_t x = 0; x < n && done < probes; ++x) {
      if (subset.contains(x)) continue;
      const double diff = f.evaluate(subset.with(x)) - base;
      worst = std::max(worst, std::abs(sess::marginal_gain(state, x) - diff));
      ++done;
    }
  }
  return {worst < sess::kComposedTolerance, fmt("%zu probes, max deviation %.3g", probes, worst)};
}

Outcome verbal_parser() {
  const auto outcomes = sess::testing::run_verbal_goldens(kGolden + "/verbal");
  std::size_t ok = 0;
  std::string first_bad;
  for (const auto& o : outcomes) {
    if (o.ok)
      ++ok;
    else if (first_bad.empty())
      first_bad = o.file + ": " + o.message;
  }
  return {outcomes.size() >= 10 && ok == outcomes.size(),
          fmt("%zu/%zu golden replies", ok, outcomes.size()) +
              (first_bad.empty() ? "" : "; " + first_bad)};
}

sess::Pool pool_of(const std::vector<std::string>& texts) {
  std::vector<sess::Example> ex;
  for (std::size_t i = 0; i < texts.size(); ++i) ex.push_back({"t" + std::to_string(i), texts[i], {}, {}});
  return sess::Pool(std::move(ex));
}

Outcome similarity_construction() {
  // Unit vectors with exactly known pairwise cosines.
  const std::vector<double> v = {1, 0, 0,  0, 1, 0,  -1, 0, 0,  0.6, 0.8, 0,  2.0 / 3, 2.0 / 3, 1.0 / 3};
  const double cosines[5][5] = {{1, 0, -1, 0.6, 2.0 / 3},
                                {0, 1, 0, 0.8, 2.0 / 3},
                                {-1, 0, 1, -0.6, -2.0 / 3},
                                {0.6, 0.8, -0.6, 1, 0.4 + 1.6 / 3},
                                {2.0 / 3, 2.0 / 3, -2.0 / 3, 0.4 + 1.6 / 3, 1}};
  const auto dense = sess::dense_similarity(sess::EmbeddingTable(3, v));
  double dense_err = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      dense_err = std::max(dense_err, std::abs(dense(i, j) - (1.0 + cosines[i][j]) / 2.0));

  const auto lexical = sess::tfidf_similarity(
      pool_of({"how many apples", "apples and pears", "pears only", "nothing", "how many pears"}));
  const auto dense5 = dense;
  const bool endpoints = sess::mix(dense5, lexical, 1.0) == dense5 && sess::mix(dense5, lexical, 0.0) == lexical;

  std::ifstream in(kGolden + "/tfidf.json");
  const auto cases = nlohmann::json::parse(in);
  double tfidf_err = 0.0;
  std::size_t pairs = 0;
  for (const auto& c : cases) {
    const auto m = sess::tfidf_similarity(pool_of(c["texts"].get<std::vector<std::string>>()));
    for (const auto& p : c["pairs"]) {
      tfidf_err = std::max(tfidf_err, std::abs(m(p[0], p[1]) - p[2].get<double>()));
      ++pairs;
    }
  }
  return {dense_err <= 1e-12 && endpoints && tfidf_err <= 1e-12 && cases.size() >= 5,
          fmt("dense max error %.3g, mix endpoints %s, tfidf %zu cases / %zu pairs max error %.3g",
              dense_err, endpoints ? "exact" : "differ", cases.size(), pairs, tfidf_err)};
}

Outcome synthetic_comparison() {
  sess::testing::TempDir dir;
  const auto t0 = Clock::now();
  const auto [code, out] = run_cli(
      dir, "simulate --seed 7 --pool-size 200 --dim 8 --budget 20 --repetitions 16 --threads 0");
  const double secs = seconds_since(t0);
  if (code != 0) return {false, fmt("simulate exited with %d", code)};
  const auto golden = read_file(kGolden + "/simulate_seed7.json");
  const bool stable = !golden.empty() && golden == out;
  const auto doc = nlohmann::json::parse(out);
  double random = 0.0, best_sess = -1.0;
  std::string best_name;
  for (const auto& row : doc["rows"]) {
    const std::string name = row["selector"];
    const double mean = row["mean_full_accuracy"];
    if (name == "random") random = mean;
    if ((name == "rep" || name == "lc" || name == "wrep") && mean > best_sess) {
      best_sess = mean;
      best_name = name;
    }
  }
  return {stable && best_sess > random && secs < 60.0,
          fmt("snapshot %s, random %.6f, best %s %.6f, %.2f s", stable ? "identical" : "differs",
              random, best_name.c_str(), best_sess, secs)};
}

Outcome threads_determinism() {
  sess::testing::TempDir dir;
  sess::Rng rng(15);
  constexpr std::size_t n = 400, dim = 16;
  static const char* words[] = {"apple", "sum", "train", "speed", "prime", "area", "circle", "ratio",
                                "cost", "share", "total", "minutes", "hours", "miles", "coins", "dozen"};
  std::ofstream pool(dir.file("pool.jsonl")), emb(dir.file("emb.jsonl")), conf(dir.file("conf.jsonl"));
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (int w = 0; w < 8; ++w) text += std::string(words[rng.below(16)]) + " ";
    const auto id = "x" + std::to_string(i);
    pool << nlohmann::json{{"id", id}, {"text", text}}.dump() << '\n';
    std::vector<double> e(dim);
    for (auto& x : e) x = rng.normal();
    emb << nlohmann::json{{"id", id}, {"vector", e}}.dump() << '\n';
    conf << nlohmann::json{{"id", id}, {"raw", -3.0 * rng.uniform()}, {"source", "loglik"}}.dump()
         << '\n';
  }
  pool.close();
  emb.close();
  conf.close();
  const std::string inputs = " --input " + dir.file("pool.jsonl") + " --embeddings " +
                             dir.file("emb.jsonl") + " --confidences " + dir.file("conf.jsonl");
  std::size_t identical = 0, runs = 0;
  std::string failure;
  for (const char* variant : {"--objective rep --algorithm naive", "--objective rep --algorithm lazy",
                              "--objective wrep --algorithm naive", "--objective wrep --algorithm lazy",
                              "--objective lc"}) {
    const std::string args = std::string("select ") + variant + " --budget 25" + inputs;
    const auto a = run_cli(dir, args + " --threads 1");
    const auto b = run_cli(dir, args + " --threads 8");
    ++runs;
    if (a.first == 0 && b.first == 0 && !a.second.empty() && a.second == b.second)
      ++identical;
    else if (failure.empty())
      failure = std::string("; differs for ") + variant;
  }
  return {identical == runs, fmt("%zu/%zu select variants byte-identical", identical, runs) + failure};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"proof-check suite", proof_check},
      {"greedy guarantee", greedy_guarantee},
      {"lazy/naive equivalence", lazy_equals_naive},
      {"lambda=0 reduction", lambda_zero_reduction},
      {"marginal-gain consistency", marginal_gain_consistency},
      {"verbal-confidence parser", verbal_parser},
      {"similarity construction", similarity_construction},
      {"synthetic selector comparison", synthetic_comparison},
      {"end-to-end determinism", threads_determinism},
  };
  int failed = 0, index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << index << "] " << name << ": " << o.detail
              << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}

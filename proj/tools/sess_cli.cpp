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

// sess: command-line front end for evaluation subset selection.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sess/hash.hpp"
#include "sess/scorer_client.hpp"
#include "sess/sess.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kViolation = 1, kUsage = 2, kData = 3, kNetwork = 4 };

using ordered_json = nlohmann::ordered_json;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Records how an output was produced. Written next to the output as
/// "<out>.manifest.json"; only the timestamps vary between identical runs.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand)
      : subcommand_(std::move(subcommand)), started_(utc_now()) {}

  ordered_json& config() { return config_; }
  void add_input(const std::string& role, const std::string& path) {
    if (path.empty()) return;
    inputs_[role] = {{"path", path}, {"fnv1a64", sess::hash_file(path)}};
  }

  static std::string path_for(const std::string& out) { return out + ".manifest.json"; }

  void write(const std::string& out) const {
    ordered_json doc;
    doc["subcommand"] = subcommand_;
    doc["tool_version"] = kVersion;
    doc["config"] = config_;
    doc["inputs"] = inputs_;
    doc["timestamps"] = {{"started", started_}, {"finished", utc_now()}};
    std::ofstream f(path_for(out));
    if (!f) throw sess::Error(sess::ErrorCode::Io, "cannot write " + path_for(out));
    f << doc.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  std::string started_;
  ordered_json config_ = ordered_json::object();
  ordered_json inputs_ = ordered_json::object();
};

// Writes the primary document to --out (plus manifest) or to stdout.
void emit(ordered_json doc, const std::string& out, const RunManifest& manifest) {
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  doc["manifest"] = std::filesystem::path(RunManifest::path_for(out)).filename().string();
  std::ofstream f(out);
  if (!f) throw sess::Error(sess::ErrorCode::Io, "cannot write " + out);
  f << doc.dump(2) << '\n';
  manifest.write(out);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw sess::Error(sess::ErrorCode::Io, "cannot write " + path);
  f << text;
}

// ---------------------------------------------------------------------------

struct SimilarityFlags {
  std::string input;
  std::string embeddings;
  std::string cache;
  double alpha = 0.7;
  unsigned threads = 0;
};

std::shared_ptr<const sess::SimilarityMatrix> build_similarity(const SimilarityFlags& f,
                                                               const sess::Pool& pool) {
  if (!f.cache.empty()) {
    auto m = sess::read_similarity_cache(f.cache);
    if (m.size() != pool.size())
      throw sess::Error(sess::ErrorCode::SizeMismatch,
                        "cache has n=" + std::to_string(m.size()) + ", pool has " +
                            std::to_string(pool.size()));
    return std::make_shared<sess::SimilarityMatrix>(std::move(m));
  }
  if (!(f.alpha >= 0.0 && f.alpha <= 1.0))
    throw sess::Error(sess::ErrorCode::AlphaOutOfRange, std::to_string(f.alpha));
  if (f.alpha == 0.0)
    return std::make_shared<sess::SimilarityMatrix>(sess::tfidf_similarity(pool, f.threads));
  const auto emb = sess::load_embeddings(f.embeddings, pool);
  auto dense = sess::dense_similarity(emb, &pool, f.threads);
  if (f.alpha == 1.0) return std::make_shared<sess::SimilarityMatrix>(std::move(dense));
  return std::make_shared<sess::SimilarityMatrix>(
      sess::mix(dense, sess::tfidf_similarity(pool, f.threads), f.alpha));
}

// ---------------------------------------------------------------------------
// select

struct SelectFlags {
  SimilarityFlags sim;
  std::string confidences;
  std::string objective = "rep";
  std::size_t budget = 0;
  double lambda = 0.5;
  std::string algorithm;
  std::uint64_t seed = 7;
  std::string out;
  std::string csv;
};

int cmd_select(const SelectFlags& f) {
  using sess::ErrorCode;
  const auto& o = f.objective;
  const bool needs_sim = o == "rep" || o == "wrep";
  const bool needs_conf = o != "rep";
  if (needs_sim && f.sim.cache.empty() && f.sim.embeddings.empty() && f.sim.alpha != 0.0)
    throw sess::Error(ErrorCode::MissingInput, o + " needs --embeddings or --similarity-cache");
  if (needs_conf && f.confidences.empty())
    throw sess::Error(ErrorCode::MissingInput, o + " needs --confidences");
  if (!(f.lambda >= 0.0 && f.lambda <= 1.0))
    throw sess::Error(ErrorCode::LambdaOutOfRange, std::to_string(f.lambda));

  sess::SelectionConfig config;
  config.budget = f.budget;
  config.threads = f.sim.threads;
  config.objective_label = o;
  config.alpha = f.sim.alpha;
  config.lambda = f.lambda;
  config.algorithm = !f.algorithm.empty() ? sess::parse_algorithm(f.algorithm)
                     : needs_sim          ? sess::Algorithm::Lazy
                                          : sess::Algorithm::Topk;

  const auto pool = sess::load_pool(f.sim.input);
  std::optional<sess::ConfidenceVector> conf;
  if (needs_conf) {
    const auto raw = sess::load_confidences(f.confidences, pool);
    if (o == "lc" && raw.source != sess::ConfidenceSource::Loglik)
      throw sess::Error(ErrorCode::InvalidConfidence, "lc expects loglik confidences; use vlc");
    if (o == "vlc" && raw.source != sess::ConfidenceSource::Verbal)
      throw sess::Error(ErrorCode::InvalidConfidence, "vlc expects verbal confidences; use lc");
    conf = sess::normalize(raw);
  }

  std::optional<sess::Objective> objective;
  if (o == "rep") {
    objective = sess::Objective::rep(build_similarity(f.sim, pool));
  } else if (o == "wrep") {
    objective = sess::Objective::wrep(build_similarity(f.sim, pool),
                                      sess::compute_weights(*conf, f.lambda));
  } else {
    objective = sess::Objective::lc(*conf);
  }
  const auto result = sess::select(*objective, config);

  RunManifest manifest("select");
  manifest.config() = {{"objective", o},
                       {"budget", f.budget},
                       {"alpha", f.sim.alpha},
                       {"lambda", f.lambda},
                       {"algorithm", std::string(sess::to_string(config.algorithm))},
                       {"seed", f.seed},
                       {"threads", f.sim.threads}};
  manifest.add_input("pool", f.sim.input);
  manifest.add_input("embeddings", f.sim.embeddings);
  manifest.add_input("similarity_cache", f.sim.cache);
  manifest.add_input("confidences", f.confidences);
  emit(sess::to_json(result, pool), f.out, manifest);

  if (!f.csv.empty()) {
    std::string csv = "rank,position,id,gain\n";
    for (std::size_t r = 0; r < result.chosen.size(); ++r)
      csv += std::to_string(r) + "," + std::to_string(result.chosen[r]) + "," +
             nlohmann::json(pool[result.chosen[r]].id).dump() + "," +
             nlohmann::json(result.gains[r]).dump() + "\n";
    write_text(f.csv, csv);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyFlags {
  std::string kind = "all";
  std::size_t trials = 1000;
  std::uint64_t seed = 7;
  std::size_t max_n = 12;
  unsigned threads = 0;
  std::string out;
};

int cmd_verify(const VerifyFlags& f) {
  std::vector<sess::ObjectiveKind> kinds;
  if (f.kind == "all" || f.kind == "rep") kinds.push_back(sess::ObjectiveKind::Rep);
  if (f.kind == "all" || f.kind == "lc") kinds.push_back(sess::ObjectiveKind::Lc);
  if (f.kind == "all" || f.kind == "wrep") kinds.push_back(sess::ObjectiveKind::Wrep);
  sess::PropertyOptions opt;
  opt.max_n = f.max_n;
  opt.threads = f.threads;
  auto reports = ordered_json::array();
  std::size_t violations = 0;
  for (auto kind : kinds) {
    for (const auto& r : {sess::check_submodularity(kind, f.trials, f.seed, opt),
                          sess::check_monotonicity(kind, f.trials, f.seed, opt)}) {
      violations += r.violations;
      reports.push_back(sess::to_json(r));
    }
  }
  RunManifest manifest("verify");
  manifest.config() = {{"kind", f.kind}, {"trials", f.trials}, {"seed", f.seed},
                       {"max_n", f.max_n}, {"threads", f.threads}};
  ordered_json doc;
  doc["reports"] = std::move(reports);
  doc["total_violations"] = violations;
  emit(std::move(doc), f.out, manifest);
  return violations == 0 ? kOk : kViolation;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
  sess::sim::ComparisonConfig cfg;
  std::vector<std::string> selectors;
  std::string out;
  std::string csv;
};

int cmd_simulate(SimulateFlags f) {
  if (f.cfg.budget > f.cfg.task.pool_size)
    throw sess::Error(sess::ErrorCode::BudgetExceedsPool,
                      "--budget " + std::to_string(f.cfg.budget) + " > --pool-size " +
                          std::to_string(f.cfg.task.pool_size));
  if (!f.selectors.empty()) {
    f.cfg.selectors.clear();
    for (const auto& s : f.selectors) f.cfg.selectors.push_back(sess::sim::parse_selector(s));
  }
  const auto table = sess::sim::compare_selectors(f.cfg);
  RunManifest manifest("simulate");
  manifest.config() = sess::sim::to_json(table)["scenario"];
  manifest.config()["threads"] = f.cfg.threads;
  emit(sess::sim::to_json(table), f.out, manifest);
  if (!f.csv.empty()) write_text(f.csv, sess::sim::to_csv(table));
  return kOk;
}

// ---------------------------------------------------------------------------
// confidence

int cmd_parse_verbal(const std::string& input, const std::string& replies, const std::string& out) {
  const auto pool = sess::load_pool(input);
  const auto raw = sess::load_verbal_replies(replies, pool);
  std::ofstream f(out);
  if (!f) throw sess::Error(sess::ErrorCode::Io, "cannot write " + out);
  sess::write_confidences(f, raw, pool);
  return kOk;
}

int cmd_from_logprobs(const std::string& input, const std::string& logprobs,
                      const std::string& out) {
  const auto pool = sess::load_pool(input);
  auto in = sess::detail::open_input(logprobs);
  const auto records = sess::read_logprob_records(in, logprobs);
  const auto raw = sess::loglik_confidence(records, pool);
  std::ofstream f(out);
  if (!f) throw sess::Error(sess::ErrorCode::Io, "cannot write " + out);
  sess::write_confidences(f, raw, pool);
  return kOk;
}

// ---------------------------------------------------------------------------
// fetch

struct FetchFlags {
  std::string input;
  std::string out;
  sess::scorer::EndpointConfig endpoint;
  bool force = false;
  std::string format = "numeric";
  std::string score_mode = "echo";
};

int report_fetch(const sess::scorer::FetchReport& r) {
  std::cerr << "requested " << r.requested << ", written " << r.written << ", skipped "
            << r.skipped << ", failed " << r.failures.size() << '\n';
  for (const auto& fail : r.failures) std::cerr << "  " << fail.id << ": " << fail.message << '\n';
  return r.failures.empty() ? kOk : kNetwork;
}

// ---------------------------------------------------------------------------
// similarity build

int cmd_similarity_build(const SimilarityFlags& f, const std::string& out) {
  const auto pool = sess::load_pool(f.input);
  SimilarityFlags fresh = f;
  fresh.cache.clear();
  const auto m = build_similarity(fresh, pool);
  nlohmann::json sidecar = {{"format", "SESSM1"},
                            {"n", m->size()},
                            {"alpha", f.alpha},
                            {"lexical", "tfidf-l2-sqrt"},
                            {"tool_version", kVersion},
                            {"sources",
                             {{"pool", sess::hash_file(f.input)},
                              {"embeddings",
                               f.embeddings.empty() ? nlohmann::json(nullptr)
                                                    : nlohmann::json(sess::hash_file(f.embeddings))}}}};
  sess::write_similarity_cache(out, *m, sidecar);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted evaluation subset selection with submodular objectives"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // select
  SelectFlags sel;
  auto* select = app.add_subcommand("select", "Choose an evaluation subset");
  select->add_option("--input", sel.sim.input, "Pool JSONL")->required()->check(CLI::ExistingFile);
  select->add_option("--embeddings", sel.sim.embeddings, "Embedding JSONL")->check(CLI::ExistingFile);
  select->add_option("--similarity-cache", sel.sim.cache, "Prebuilt SESSM1 matrix")
      ->check(CLI::ExistingFile);
  select->add_option("--confidences", sel.confidences, "Confidence JSONL")->check(CLI::ExistingFile);
  select->add_option("--objective", sel.objective)
      ->check(CLI::IsMember({"rep", "lc", "vlc", "wrep"}))
      ->capture_default_str();
  select->add_option("--budget", sel.budget, "Subset size k")->required()->check(CLI::PositiveNumber);
  select->add_option("--alpha", sel.sim.alpha, "Dense weight in the similarity mix")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  select->add_option("--lambda", sel.lambda, "Difficulty weight for wrep")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  select->add_option("--algorithm", sel.algorithm, "naive, lazy or topk")
      ->check(CLI::IsMember({"naive", "lazy", "topk"}));
  select->add_option("--seed", sel.seed)->capture_default_str();
  select->add_option("--out", sel.out, "Result JSON (stdout if omitted)");
  select->add_option("--csv", sel.csv, "Optional CSV of picks");
  select->add_option("--threads", sel.sim.threads, "Worker cap, 0 = all cores")->capture_default_str();

  // verify
  VerifyFlags ver;
  auto* verify = app.add_subcommand("verify", "Check monotonicity and submodularity numerically");
  verify->add_option("--kind", ver.kind)
      ->check(CLI::IsMember({"all", "rep", "lc", "wrep"}))
      ->capture_default_str();
  verify->add_option("--trials", ver.trials)->check(CLI::PositiveNumber)->capture_default_str();
  verify->add_option("--seed", ver.seed)->capture_default_str();
  verify->add_option("--max-n", ver.max_n)->check(CLI::Range(2, 20))->capture_default_str();
  verify->add_option("--threads", ver.threads)->capture_default_str();
  verify->add_option("--out", ver.out);

  // simulate
  SimulateFlags simf;
  auto* simulate = app.add_subcommand("simulate", "Synthetic prompt-optimization comparison");
  simulate->add_option("--pool-size", simf.cfg.task.pool_size)->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--dim", simf.cfg.task.dim)->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--clusters", simf.cfg.task.clusters)->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--budget", simf.cfg.budget)->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--repetitions", simf.cfg.repetitions)->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--seed", simf.cfg.task.seed)->capture_default_str();
  simulate->add_option("--steps", simf.cfg.optimizer.steps)->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--candidates", simf.cfg.optimizer.candidates_per_step)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--step-size", simf.cfg.optimizer.step_size)->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--lambda", simf.cfg.lambda)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  simulate->add_option("--selectors", simf.selectors, "Subset of random,rep,lc,wrep,full")->delimiter(',');
  simulate->add_option("--threads", simf.cfg.threads)->capture_default_str();
  simulate->add_option("--out", simf.out);
  simulate->add_option("--csv", simf.csv);

  // confidence
  auto* confidence = app.add_subcommand("confidence", "Turn scorer output into confidences");
  confidence->require_subcommand(1);
  std::string conf_input, conf_replies, conf_logprobs, conf_out;
  auto* parse_verbal = confidence->add_subcommand("parse-verbal", "Parse <id>.txt verbal replies");
  parse_verbal->add_option("--input", conf_input)->required()->check(CLI::ExistingFile);
  parse_verbal->add_option("--replies", conf_replies)->required()->check(CLI::ExistingDirectory);
  parse_verbal->add_option("--out", conf_out)->required();
  auto* from_logprobs = confidence->add_subcommand("from-logprobs", "Average answer logprobs");
  from_logprobs->add_option("--input", conf_input)->required()->check(CLI::ExistingFile);
  from_logprobs->add_option("--logprobs", conf_logprobs)->required()->check(CLI::ExistingFile);
  from_logprobs->add_option("--out", conf_out)->required();

  // fetch
  auto* fetch = app.add_subcommand("fetch", "Query an OpenAI-compatible scorer");
  fetch->require_subcommand(1);
  FetchFlags ff;
  ff.endpoint.api_key = sess::scorer::api_key_from_env();
  const auto add_endpoint_flags = [&](CLI::App* cmd) {
    cmd->add_option("--input", ff.input)->required()->check(CLI::ExistingFile);
    cmd->add_option("--endpoint", ff.endpoint.base_url, "e.g. http://localhost:8000/v1")->required();
    cmd->add_option("--model", ff.endpoint.model)->required();
    cmd->add_option("--concurrency", ff.endpoint.concurrency)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--timeout", ff.endpoint.timeout_seconds)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--retries", ff.endpoint.max_retries)->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--temperature", ff.endpoint.temperature)->capture_default_str();
    cmd->add_option("--out", ff.out)->required();
  };
  auto* fetch_verbal = fetch->add_subcommand("verbal", "Collect verbal-confidence replies");
  add_endpoint_flags(fetch_verbal);
  fetch_verbal->add_flag("--force", ff.force, "Re-request existing replies");
  auto* fetch_logprobs = fetch->add_subcommand("logprobs", "Collect gold-answer token logprobs");
  add_endpoint_flags(fetch_logprobs);
  fetch_logprobs->add_option("--format", ff.format)
      ->check(CLI::IsMember({"numeric", "choice"}))
      ->capture_default_str();
  fetch_logprobs->add_option("--score-mode", ff.score_mode)
      ->check(CLI::IsMember({"echo", "prompt-logprobs"}))
      ->capture_default_str();

  // similarity build
  auto* similarity = app.add_subcommand("similarity", "Similarity matrix utilities");
  similarity->require_subcommand(1);
  SimilarityFlags simb;
  std::string simb_out;
  auto* build = similarity->add_subcommand("build", "Build and cache the mixed similarity matrix");
  build->add_option("--input", simb.input)->required()->check(CLI::ExistingFile);
  build->add_option("--embeddings", simb.embeddings)->check(CLI::ExistingFile);
  build->add_option("--alpha", simb.alpha)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  build->add_option("--threads", simb.threads)->capture_default_str();
  build->add_option("--out", simb_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*select) return cmd_select(sel);
    if (*verify) return cmd_verify(ver);
    if (*simulate) return cmd_simulate(simf);
    if (*parse_verbal) return cmd_parse_verbal(conf_input, conf_replies, conf_out);
    if (*from_logprobs) return cmd_from_logprobs(conf_input, conf_logprobs, conf_out);
    if (*fetch_verbal) return report_fetch(sess::scorer::fetch_verbal(ff.endpoint, sess::load_pool(ff.input), ff.out, ff.force));
    if (*fetch_logprobs)
      return report_fetch(sess::scorer::fetch_logprobs(
          ff.endpoint, sess::load_pool(ff.input), ff.out, sess::scorer::parse_answer_format(ff.format),
          sess::scorer::parse_score_mode(ff.score_mode)));
    if (*build) {
      if (simb.alpha > 0.0 && simb.embeddings.empty())
        throw sess::Error(sess::ErrorCode::MissingInput, "--embeddings is required unless --alpha 0");
      return cmd_similarity_build(simb, simb_out);
    }
  } catch (const sess::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.category()) {
      case sess::ErrorCategory::Usage: return kUsage;
      case sess::ErrorCategory::Network: return kNetwork;
      case sess::ErrorCategory::Data: return kData;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

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

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "sess/corpus.hpp"
#include "sess/error.hpp"
#include "sess/parallel.hpp"

// Client for OpenAI-compatible servers (hosted APIs, vLLM and friends) that
// collects the raw material the confidence module consumes: verbal
// confidence replies and token logprobs of gold answers.

namespace sess::scorer {

struct EndpointConfig {
  /// Absolute URL including the API prefix, e.g. "http://localhost:8000/v1".
  std::string base_url;
  std::string model;
  std::string api_key;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.0;
  std::size_t concurrency = 4;
  double initial_backoff_seconds = 0.5;
};

/// Key from SESS_API_KEY, falling back to OPENAI_API_KEY.
inline std::string api_key_from_env() {
  for (const char* name : {"SESS_API_KEY", "OPENAI_API_KEY"})
    if (const char* v = std::getenv(name); v && *v) return v;
  return {};
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash, may be empty
};

inline ParsedUrl parse_base_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/\s?#]+)(/[^\s?#]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re))
    throw Error(ErrorCode::InvalidArgument, "endpoint must be an absolute http(s) URL: " + url);
  ParsedUrl out{m[1].str(), m[2].str()};
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

inline void validate(const EndpointConfig& cfg) {
  parse_base_url(cfg.base_url);
  if (!(cfg.timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "timeout must be > 0");
  if (cfg.max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max retries must be >= 0");
  if (cfg.concurrency == 0) throw Error(ErrorCode::InvalidArgument, "concurrency must be >= 1");
  if (cfg.model.empty()) throw Error(ErrorCode::InvalidArgument, "model name is required");
}

// ---------------------------------------------------------------------------
// Prompt templates

inline std::string render_verbal_prompt(std::string_view question) {
  static constexpr std::string_view ordinals[] = {"first", "second", "third", "fourth"};
  std::string p =
      "Provide your 4 best guesses and the probability that each is correct (0.0 to 1.0) for "
      "the following question. Give ONLY the guesses and probabilities, no other words or "
      "explanation. For example:\n\n";
  for (int k = 1; k <= 4; ++k) {
    const auto n = std::to_string(k);
    p += "G" + n + ": <" + std::string(ordinals[k - 1]) +
         " most likely guess, as short as possible; not a complete sentence, just the guess!>\n";
    p += "P" + n + ": <the probability between 0.0 and 1.0 that G" + n +
         " is correct, without any extra commentary whatsoever; just the probability!>\n\n";
  }
  p += "The question is:\n";
  p += question;
  return p;
}

enum class AnswerFormat { Numeric, Choice };

inline AnswerFormat parse_answer_format(std::string_view s) {
  if (s == "numeric") return AnswerFormat::Numeric;
  if (s == "choice") return AnswerFormat::Choice;
  throw Error(ErrorCode::InvalidArgument, "unknown answer format '" + std::string(s) + "'");
}

/// Everything before the gold answer; the scored prompt is this plus the answer.
inline std::string render_likelihood_prefix(std::string_view question, AnswerFormat format) {
  std::string p = format == AnswerFormat::Choice
                      ? "Directly give the choice A or B or C or D: "
                      : "Directly give the numeric answer to the following question: ";
  p += question;
  p += "\nAnswer: ";
  return p;
}

inline std::string render_likelihood_prompt(std::string_view question, std::string_view answer,
                                            AnswerFormat format) {
  return render_likelihood_prefix(question, format) + std::string(answer);
}

// ---------------------------------------------------------------------------
// Transport

struct Failure {
  std::string id;
  int status = 0;  // 0 when no HTTP response arrived
  std::string message;
};

struct FetchReport {
  std::size_t requested = 0;
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<Failure> failures;
};

namespace detail {

struct Response {
  int status = 0;
  std::string body;
  std::string error;  // transport error when status == 0
};

class Transport {
 public:
  explicit Transport(const EndpointConfig& cfg) : cfg_(cfg), url_(parse_base_url(cfg.base_url)) {
    client_ = std::make_unique<httplib::Client>(url_.origin);
    const auto usec = static_cast<long>(cfg.timeout_seconds * 1e6);
    client_->set_connection_timeout(usec / 1000000, usec % 1000000);
    client_->set_read_timeout(usec / 1000000, usec % 1000000);
    client_->set_write_timeout(usec / 1000000, usec % 1000000);
    if (!cfg.api_key.empty()) client_->set_bearer_token_auth(cfg.api_key);
  }

  /// POSTs JSON with exponential backoff on transport errors, 429 and 5xx.
  Response post(const std::string& path, const nlohmann::json& body) {
    Response r;
    const auto payload = body.dump();
    double backoff = cfg_.initial_backoff_seconds;
    for (int attempt = 0;; ++attempt) {
      auto res = client_->Post(url_.prefix + path, payload, "application/json");
      if (res) {
        r = {res->status, res->body, {}};
      } else {
        r = {0, {}, httplib::to_string(res.error())};
      }
      const bool retryable = r.status == 0 || r.status == 429 || r.status >= 500;
      if (!retryable || attempt >= cfg_.max_retries) return r;
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
  }

 private:
  const EndpointConfig& cfg_;
  ParsedUrl url_;
  std::unique_ptr<httplib::Client> client_;
};

inline std::string describe(const Response& r) {
  if (r.status == 0) return "transport error: " + r.error;
  return "HTTP " + std::to_string(r.status) + ": " + r.body.substr(0, 200);
}

inline void check_id_is_filename(const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos ||
      id.find('\0') != std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "id '" + id + "' cannot be used as a file name");
}

inline void append_failures(const std::filesystem::path& manifest,
                            const std::vector<Failure>& failures) {
  if (failures.empty()) return;
  std::ofstream out(manifest, std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + manifest.string());
  for (const auto& f : failures)
    out << nlohmann::json{{"id", f.id}, {"status", f.status}, {"error", f.message}}.dump() << '\n';
}

/// Runs job(i, transport) for each i on at most cfg.concurrency workers,
/// each with its own connection.
template <class Job>
void run_bounded(const EndpointConfig& cfg, std::size_t n, Job&& job) {
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min(cfg.concurrency, n);
  parallel_for(workers, static_cast<unsigned>(workers), [&](std::size_t) {
    Transport transport(cfg);
    for (std::size_t i = next++; i < n; i = next++) job(i, transport);
  });
}

}  // namespace detail

/// Writes one reply file "<id>.txt" per example. Existing files are kept
/// unless `force`. Failed requests do not stop the batch; they are returned
/// and appended to "<out_dir>/failures.jsonl".
inline FetchReport fetch_verbal(const EndpointConfig& cfg, const Pool& pool,
                                const std::filesystem::path& out_dir, bool force = false) {
  validate(cfg);
  for (const auto& ex : pool.examples()) detail::check_id_is_filename(ex.id);
  std::filesystem::create_directories(out_dir);

  std::vector<std::size_t> pending;
  FetchReport report;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (!force && std::filesystem::exists(out_dir / (pool[j].id + ".txt"))) {
      ++report.skipped;
      continue;
    }
    pending.push_back(j);
  }
  report.requested = pending.size();

  std::vector<std::optional<Failure>> failures(pending.size());
  std::atomic<std::size_t> written{0};
  detail::run_bounded(cfg, pending.size(), [&](std::size_t i, detail::Transport& t) {
    const auto& ex = pool[pending[i]];
    nlohmann::json body = {
        {"model", cfg.model},
        {"messages", {{{"role", "user"}, {"content", render_verbal_prompt(ex.text)}}}},
        {"temperature", cfg.temperature}};
    const auto res = t.post("/chat/completions", body);
    if (res.status != 200) {
      failures[i] = Failure{ex.id, res.status, detail::describe(res)};
      return;
    }
    std::string content;
    try {
      content = nlohmann::json::parse(res.body).at("choices").at(0).at("message").at("content");
    } catch (const std::exception& e) {
      failures[i] = Failure{ex.id, res.status, std::string("unexpected response: ") + e.what()};
      return;
    }
    const auto path = out_dir / (ex.id + ".txt");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) {
      failures[i] = Failure{ex.id, 0, "cannot write " + path.string()};
      return;
    }
    ++written;
  });
  for (auto& f : failures)
    if (f) report.failures.push_back(std::move(*f));
  report.written = written;
  detail::append_failures(out_dir / "failures.jsonl", report.failures);
  return report;
}

// ---------------------------------------------------------------------------
// Answer logprobs

/// How answer tokens are scored.
///   Echo: legacy completions with echo=true and logprobs, answer tokens
///         located through text_offset.
///   PromptLogprobs: vLLM's prompt_logprobs extension, answer tokens located
///         by walking decoded tokens back from the end of the prompt.
enum class ScoreMode { Echo, PromptLogprobs };

constexpr std::string_view to_string(ScoreMode m) {
  return m == ScoreMode::Echo ? "echo" : "prompt-logprobs";
}

inline ScoreMode parse_score_mode(std::string_view s) {
  if (s == "echo") return ScoreMode::Echo;
  if (s == "prompt-logprobs") return ScoreMode::PromptLogprobs;
  throw Error(ErrorCode::InvalidArgument, "unknown score mode '" + std::string(s) + "'");
}

/// Logprobs of the tokens overlapping [answer_begin, prompt_size) in an echo
/// response. Returns nullopt when the response carries no logprobs.
inline std::optional<std::vector<double>> answer_logprobs_from_echo(const nlohmann::json& response,
                                                                    std::size_t answer_begin,
                                                                    std::size_t prompt_size) {
  const auto& choice = response.at("choices").at(0);
  auto lp = choice.find("logprobs");
  if (lp == choice.end() || !lp->is_object()) return std::nullopt;
  auto tokens = lp->find("tokens");
  auto values = lp->find("token_logprobs");
  auto offsets = lp->find("text_offset");
  if (tokens == lp->end() || values == lp->end() || offsets == lp->end() || !tokens->is_array() ||
      !values->is_array() || !offsets->is_array() || tokens->size() != values->size() ||
      tokens->size() != offsets->size())
    return std::nullopt;
  std::vector<double> out;
  const std::size_t n = tokens->size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto begin = (*offsets)[i].get<std::size_t>();
    const auto end = i + 1 < n ? (*offsets)[i + 1].get<std::size_t>()
                               : begin + (*tokens)[i].get<std::string>().size();
    if (begin >= prompt_size) break;  // generated continuation
    if (end <= answer_begin || end <= begin) continue;
    if ((*values)[i].is_null()) return std::nullopt;
    out.push_back((*values)[i].get<double>());
  }
  return out;
}

/// Same for a prompt_logprobs response. The first entry is null by
/// convention, so offsets are reconstructed from the end of the prompt.
inline std::optional<std::vector<double>> answer_logprobs_from_prompt_logprobs(
    const nlohmann::json& response, std::size_t answer_begin, std::size_t prompt_size) {
  const auto& choice = response.at("choices").at(0);
  auto pl = choice.find("prompt_logprobs");
  if (pl == choice.end() || !pl->is_array()) {
    pl = response.find("prompt_logprobs");
    if (pl == response.end() || !pl->is_array()) return std::nullopt;
  }
  std::vector<double> reversed;
  std::size_t end = prompt_size;
  for (std::size_t i = pl->size(); i-- > 0 && end > answer_begin;) {
    const auto& entry = (*pl)[i];
    if (!entry.is_object() || entry.empty()) return std::nullopt;
    // With prompt_logprobs=0 the entry holds only the actual prompt token.
    const auto& info = entry.begin().value();
    const auto text = info.value("decoded_token", std::string());
    if (!info.contains("logprob")) return std::nullopt;
    reversed.push_back(info.at("logprob").get<double>());
    if (text.size() > end) return std::nullopt;
    end -= text.size();
  }
  if (end > answer_begin) return std::nullopt;
  return std::vector<double>(reversed.rbegin(), reversed.rend());
}

/// Scores every gold answer and writes {"id", "answer_token_logprobs",
/// "mode"} lines in pool order. Examples without an answer are rejected
/// before any request is sent; an endpoint that does not return logprobs
/// aborts with UnsupportedEndpoint. Other failures go to
/// "<out_path>.failures.jsonl".
inline FetchReport fetch_logprobs(const EndpointConfig& cfg, const Pool& pool,
                                  const std::filesystem::path& out_path, AnswerFormat format,
                                  ScoreMode mode = ScoreMode::Echo) {
  validate(cfg);
  for (const auto& ex : pool.examples())
    if (!ex.answer || ex.answer->empty()) throw Error(ErrorCode::MissingAnswer, ex.id);

  FetchReport report;
  report.requested = pool.size();
  std::vector<std::optional<std::vector<double>>> results(pool.size());
  std::vector<std::optional<Failure>> failures(pool.size());
  std::atomic<bool> unsupported{false};
  std::string unsupported_detail;
  std::mutex mu;

  detail::run_bounded(cfg, pool.size(), [&](std::size_t j, detail::Transport& t) {
    if (unsupported) return;
    const auto& ex = pool[j];
    const auto prefix = render_likelihood_prefix(ex.text, format);
    const auto prompt = prefix + *ex.answer;
    nlohmann::json body = {{"model", cfg.model},
                           {"prompt", prompt},
                           {"max_tokens", 1},
                           {"temperature", cfg.temperature}};
    if (mode == ScoreMode::Echo) {
      body["echo"] = true;
      body["logprobs"] = 1;
    } else {
      body["prompt_logprobs"] = 0;
    }
    const auto res = t.post("/completions", body);
    const auto mark_unsupported = [&](const std::string& why) {
      std::lock_guard lock(mu);
      if (!unsupported.exchange(true)) unsupported_detail = why;
    };
    if (res.status == 400 || res.status == 404 || res.status == 422) {
      mark_unsupported(detail::describe(res));
      return;
    }
    if (res.status != 200) {
      failures[j] = Failure{ex.id, res.status, detail::describe(res)};
      return;
    }
    try {
      const auto doc = nlohmann::json::parse(res.body);
      auto lps = mode == ScoreMode::Echo
                     ? answer_logprobs_from_echo(doc, prefix.size(), prompt.size())
                     : answer_logprobs_from_prompt_logprobs(doc, prefix.size(), prompt.size());
      if (!lps) {
        mark_unsupported("response carries no usable prompt logprobs");
        return;
      }
      if (lps->empty()) {
        failures[j] = Failure{ex.id, res.status, "no answer tokens found in response"};
        return;
      }
      results[j] = std::move(*lps);
    } catch (const std::exception& e) {
      failures[j] = Failure{ex.id, res.status, std::string("unexpected response: ") + e.what()};
    }
  });

  if (unsupported) {
    const auto other = mode == ScoreMode::Echo ? "prompt-logprobs" : "echo";
    throw Error(ErrorCode::UnsupportedEndpoint,
                std::string("endpoint did not return prompt token logprobs in '") +
                    std::string(to_string(mode)) + "' mode (" + unsupported_detail +
                    "); retry with --score-mode " + other +
                    " or use a server that scores prompt tokens");
  }

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + out_path.string());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (failures[j]) report.failures.push_back(std::move(*failures[j]));
    if (!results[j]) continue;
    nlohmann::ordered_json line;
    line["id"] = pool[j].id;
    line["answer_token_logprobs"] = *results[j];
    line["mode"] = std::string(to_string(mode));
    out << line.dump() << '\n';
    ++report.written;
  }
  detail::append_failures(out_path.string() + ".failures.jsonl", report.failures);
  return report;
}

}  // namespace sess::scorer

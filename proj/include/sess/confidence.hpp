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
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sess/corpus.hpp"
#include "sess/error.hpp"
#include "sess/parallel.hpp"

namespace sess {

enum class ConfidenceSource { Verbal, Loglik };

constexpr std::string_view to_string(ConfidenceSource s) {
  return s == ConfidenceSource::Verbal ? "verbal" : "loglik";
}

inline ConfidenceSource parse_confidence_source(std::string_view s) {
  if (s == "verbal") return ConfidenceSource::Verbal;
  if (s == "loglik") return ConfidenceSource::Loglik;
  throw Error(ErrorCode::InvalidConfidence, "unknown source '" + std::string(s) + "'");
}

/// Raw scorer confidence c(j), aligned to pool positions.
struct RawConfidence {
  ConfidenceSource source = ConfidenceSource::Loglik;
  std::vector<double> values;
};

/// Normalized confidence in [0, 1], aligned to pool positions.
struct ConfidenceVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
};

/// Importance weights w(j) = (1 - lambda) + lambda * (1 - c~(j)).
struct WeightVector {
  std::vector<double> values;
  double lambda = 0.0;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
};

// ---------------------------------------------------------------------------
// Verbalized confidence

struct VerbalParse {
  double confidence = 0.0;
  /// Number of probability lines that parsed.
  std::size_t parsed = 0;
  std::vector<std::string> warnings;
};

/// Extracts the largest "P<k>: <prob>" value from a scorer reply. Guess lines
/// are ignored. Values outside [0, 1] are clamped and a trailing '%' divides
/// by 100; each such repair is reported as a warning. Lines whose value does
/// not parse are skipped with a warning unless none parse at all.
inline VerbalParse parse_verbal_response(std::string_view reply) {
  static const std::regex prob_line(R"(^\s*[*_]*\s*[Pp]([0-9]+)\s*[*_]*\s*:\s*[*_]*\s*(.*?)\s*$)");
  VerbalParse out;
  std::optional<double> best;
  std::optional<std::size_t> first_bad_line;
  std::size_t probability_lines = 0;

  std::istringstream lines{std::string(reply)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (!std::regex_match(line, m, prob_line)) continue;
    ++probability_lines;
    const std::string body = m[2].str();
    const char* first = body.data();
    const char* last = body.data() + body.size();
    if (first != last && *first == '+') ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
    if (ec != std::errc() || !std::isfinite(value)) {
      out.warnings.push_back("line " + std::to_string(line_no) +
                             ": unparseable probability '" + body + "'");
      if (!first_bad_line) first_bad_line = line_no;
      continue;
    }
    std::string_view rest(ptr, static_cast<std::size_t>(last - ptr));
    while (!rest.empty() && (rest.front() == ' ' || rest.front() == '*' || rest.front() == '_'))
      rest.remove_prefix(1);
    if (!rest.empty() && rest.front() == '%') value /= 100.0;
    if (value < 0.0 || value > 1.0) {
      const double clamped = std::clamp(value, 0.0, 1.0);
      std::ostringstream msg;
      msg << "line " << line_no << ": probability " << value << " clamped to " << clamped;
      out.warnings.push_back(msg.str());
      value = clamped;
    }
    ++out.parsed;
    best = best ? std::max(*best, value) : value;
  }
  if (probability_lines == 0) throw Error(ErrorCode::NoProbabilityFound, "no P<k> line in reply");
  if (!best) throw Error(ErrorCode::UnparseableProbability, std::to_string(*first_bad_line));
  out.confidence = *best;
  return out;
}

/// Reads "<id>.txt" replies for every pool example. All failures are
/// collected before throwing so a single run reports every bad file.
inline RawConfidence load_verbal_replies(const std::filesystem::path& dir, const Pool& pool) {
  RawConfidence raw{ConfidenceSource::Verbal, std::vector<double>(pool.size(), 0.0)};
  std::vector<std::string> missing;
  std::vector<std::string> failed;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const auto path = dir / (pool[j].id + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      missing.push_back(pool[j].id);
      continue;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      auto parsed = parse_verbal_response(buf.str());
      for (const auto& w : parsed.warnings) warn(pool[j].id + ": " + w);
      raw.values[j] = parsed.confidence;
    } catch (const Error& e) {
      failed.push_back(pool[j].id + " (" + e.what() + ")");
    }
  }
  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!missing.empty()) throw Error(ErrorCode::IncompleteCoverage, join(missing));
  if (!failed.empty()) throw Error(ErrorCode::NoProbabilityFound, join(failed));
  return raw;
}

// ---------------------------------------------------------------------------
// Likelihood confidence

/// Length-normalized log-likelihood of the gold answer.
inline double mean_logprob(std::span<const double> token_logprobs, const std::string& id) {
  if (token_logprobs.empty()) throw Error(ErrorCode::EmptyAnswerTokens, id);
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp)) throw Error(ErrorCode::NonFiniteValue, id);
    sum += lp;
  }
  return sum / static_cast<double>(token_logprobs.size());
}

struct LogprobRecord {
  std::string id;
  std::vector<double> answer_token_logprobs;
};

/// Maps per-example answer logprobs onto pool positions.
inline RawConfidence loglik_confidence(std::span<const LogprobRecord> records, const Pool& pool) {
  RawConfidence raw{ConfidenceSource::Loglik, std::vector<double>(pool.size(), 0.0)};
  std::vector<bool> seen(pool.size(), false);
  for (const auto& rec : records) {
    auto pos = pool.find(rec.id);
    if (!pos) {
      warn("logprobs: id '" + rec.id + "' is not in the pool; skipped");
      continue;
    }
    if (seen[*pos]) throw Error(ErrorCode::DuplicateId, rec.id);
    seen[*pos] = true;
    raw.values[*pos] = mean_logprob(rec.answer_token_logprobs, rec.id);
  }
  std::string missing;
  for (std::size_t j = 0; j < pool.size(); ++j)
    if (!seen[j]) missing += (missing.empty() ? "" : ", ") + pool[j].id;
  if (!missing.empty()) throw Error(ErrorCode::IncompleteCoverage, missing);
  return raw;
}

inline std::vector<LogprobRecord> read_logprob_records(std::istream& in,
                                                       const std::string& source = "logprobs") {
  std::vector<LogprobRecord> records;
  std::set<std::string> reported;
  detail::for_each_jsonl(in, [&](const nlohmann::json& obj, std::size_t line_no) {
    auto id = obj.find("id");
    auto lps = obj.find("answer_token_logprobs");
    if (id == obj.end() || !id->is_string() || lps == obj.end() || !lps->is_array())
      throw Error(ErrorCode::MalformedLine, std::to_string(line_no));
    detail::warn_unknown_keys(obj, {"id", "answer_token_logprobs", "mode"}, reported, source);
    LogprobRecord rec{id->get<std::string>(), {}};
    for (const auto& v : *lps) {
      if (!v.is_number()) throw Error(ErrorCode::MalformedLine, std::to_string(line_no));
      rec.answer_token_logprobs.push_back(v.get<double>());
    }
    records.push_back(std::move(rec));
  });
  return records;
}

// ---------------------------------------------------------------------------
// Normalization and weights

/// Pool-wide min-max scaling into [0, 1]. A constant input maps to 0.5.
inline ConfidenceVector normalize(const RawConfidence& raw) {
  if (raw.values.empty()) throw Error(ErrorCode::IncompleteCoverage, "no confidences");
  for (std::size_t j = 0; j < raw.values.size(); ++j) {
    const double v = raw.values[j];
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "position " + std::to_string(j));
    if (raw.source == ConfidenceSource::Verbal && (v < 0.0 || v > 1.0))
      throw Error(ErrorCode::InvalidConfidence,
                  "verbal confidence outside [0,1] at position " + std::to_string(j));
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.values.begin(), raw.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  ConfidenceVector out;
  out.values.resize(raw.values.size());
  if (hi == lo) {
    std::fill(out.values.begin(), out.values.end(), 0.5);
    return out;
  }
  const double range = hi - lo;
  for (std::size_t j = 0; j < raw.values.size(); ++j)
    out.values[j] = std::clamp((raw.values[j] - lo) / range, 0.0, 1.0);
  return out;
}

inline WeightVector compute_weights(const ConfidenceVector& conf, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::LambdaOutOfRange, std::to_string(lambda));
  WeightVector w;
  w.lambda = lambda;
  w.values.resize(conf.size());
  for (std::size_t j = 0; j < conf.size(); ++j)
    w.values[j] = (1.0 - lambda) + lambda * (1.0 - conf[j]);
  return w;
}

// ---------------------------------------------------------------------------
// Confidence JSONL: {"id", "raw", "source"}

inline RawConfidence read_confidences(std::istream& in, const Pool& pool,
                                      const std::string& source_name = "confidences") {
  std::optional<ConfidenceSource> source;
  std::vector<double> values(pool.size(), 0.0);
  std::vector<bool> seen(pool.size(), false);
  std::set<std::string> reported;
  detail::for_each_jsonl(in, [&](const nlohmann::json& obj, std::size_t line_no) {
    auto id = obj.find("id");
    auto raw = obj.find("raw");
    auto src = obj.find("source");
    if (id == obj.end() || !id->is_string() || raw == obj.end() || !raw->is_number() ||
        src == obj.end() || !src->is_string())
      throw Error(ErrorCode::MalformedLine, std::to_string(line_no));
    detail::warn_unknown_keys(obj, {"id", "raw", "source"}, reported, source_name);
    const auto s = parse_confidence_source(src->get<std::string>());
    if (source && *source != s)
      throw Error(ErrorCode::InvalidConfidence, "mixed sources at line " + std::to_string(line_no));
    source = s;
    const auto key = id->get<std::string>();
    auto pos = pool.find(key);
    if (!pos) {
      warn(source_name + ": id '" + key + "' is not in the pool; skipped");
      return;
    }
    if (seen[*pos]) throw Error(ErrorCode::DuplicateId, key);
    seen[*pos] = true;
    const double v = raw->get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, key);
    values[*pos] = v;
  });
  std::string missing;
  for (std::size_t j = 0; j < pool.size(); ++j)
    if (!seen[j]) missing += (missing.empty() ? "" : ", ") + pool[j].id;
  if (!missing.empty()) throw Error(ErrorCode::IncompleteCoverage, missing);
  return RawConfidence{*source, std::move(values)};
}

inline RawConfidence load_confidences(const std::string& path, const Pool& pool) {
  auto in = detail::open_input(path);
  return read_confidences(in, pool, path);
}

inline void write_confidences(std::ostream& out, const RawConfidence& raw, const Pool& pool) {
  for (std::size_t j = 0; j < pool.size(); ++j) {
    nlohmann::json obj = {{"id", pool[j].id}, {"raw", raw.values[j]},
                          {"source", std::string(to_string(raw.source))}};
    out << obj.dump() << '\n';
  }
}

}  // namespace sess

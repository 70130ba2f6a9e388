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
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sess/error.hpp"
#include "sess/parallel.hpp"

namespace sess {

struct Example {
  std::string id;
  std::string text;
  std::optional<std::string> answer;
  std::vector<std::string> tags;
};

/// The candidate pool. Positions are dense, follow input order and never
/// change once the pool is built; every matrix and vector in the library is
/// aligned to them.
class Pool {
 public:
  Pool() = default;

  explicit Pool(std::vector<Example> examples) : examples_(std::move(examples)) {
    if (examples_.empty()) throw Error(ErrorCode::EmptyPool, "pool has no examples");
    index_.reserve(examples_.size());
    for (std::size_t i = 0; i < examples_.size(); ++i) {
      const auto& ex = examples_[i];
      if (ex.text.empty())
        throw Error(ErrorCode::MalformedLine, "example '" + ex.id + "' has empty text");
      if (!index_.emplace(ex.id, i).second) throw Error(ErrorCode::DuplicateId, ex.id);
    }
  }

  std::size_t size() const noexcept { return examples_.size(); }
  const Example& operator[](std::size_t pos) const { return examples_[pos]; }
  const std::vector<Example>& examples() const noexcept { return examples_; }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t position(const std::string& id) const {
    auto pos = find(id);
    if (!pos) throw Error(ErrorCode::MissingId, id);
    return *pos;
  }

 private:
  std::vector<Example> examples_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Dense vectors aligned to pool positions, stored row-major.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dim, std::vector<double> values)
      : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw Error(ErrorCode::DimMismatch, "embedding dim must be positive");
    if (values_.size() % dim_ != 0)
      throw Error(ErrorCode::DimMismatch, "value count is not a multiple of dim");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return values_.size() / dim_; }
  std::span<const double> row(std::size_t pos) const {
    return {values_.data() + pos * dim_, dim_};
  }

 private:
  std::size_t dim_;
  std::vector<double> values_;
};

namespace detail {

inline void warn_unknown_keys(const nlohmann::json& obj,
                              std::initializer_list<std::string_view> known,
                              std::set<std::string>& reported,
                              const std::string& source) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok && reported.insert(it.key()).second)
      warn(source + ": ignoring unknown key '" + it.key() + "'");
  }
}

/// Calls fn(json, line_no) for every non-blank line; line numbers are 1-based.
template <class Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::MalformedLine, std::to_string(line_no));
    } catch (const nlohmann::json::out_of_range&) {
      // Numeric literal outside double range, e.g. 1e999.
      throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no));
    }
    if (!obj.is_object()) throw Error(ErrorCode::MalformedLine, std::to_string(line_no));
    fn(obj, line_no);
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return in;
}

}  // namespace detail

/// Reads a pool from JSONL: one {"id", "text", "answer"?, "tags"?} object per
/// line. Blank lines are skipped.
inline Pool read_pool(std::istream& in, const std::string& source = "pool") {
  std::vector<Example> examples;
  std::set<std::string> reported;
  detail::for_each_jsonl(in, [&](const nlohmann::json& obj, std::size_t line_no) {
    const auto bad = [&] { return Error(ErrorCode::MalformedLine, std::to_string(line_no)); };
    auto id = obj.find("id");
    auto text = obj.find("text");
    if (id == obj.end() || !id->is_string() || text == obj.end() || !text->is_string())
      throw bad();
    Example ex{id->get<std::string>(), text->get<std::string>(), std::nullopt, {}};
    if (ex.id.empty() || ex.text.empty()) throw bad();
    if (auto a = obj.find("answer"); a != obj.end() && !a->is_null()) {
      if (a->is_string()) {
        ex.answer = a->get<std::string>();
      } else if (a->is_number()) {
        ex.answer = a->dump();
      } else {
        throw bad();
      }
    }
    if (auto t = obj.find("tags"); t != obj.end() && !t->is_null()) {
      if (!t->is_array()) throw bad();
      for (const auto& tag : *t) {
        if (!tag.is_string()) throw bad();
        ex.tags.push_back(tag.get<std::string>());
      }
    }
    detail::warn_unknown_keys(obj, {"id", "text", "answer", "tags"}, reported, source);
    examples.push_back(std::move(ex));
  });
  if (examples.empty()) throw Error(ErrorCode::EmptyPool, source);
  return Pool(std::move(examples));
}

inline Pool load_pool(const std::string& path) {
  auto in = detail::open_input(path);
  return read_pool(in, path);
}

inline void write_pool(std::ostream& out, const Pool& pool) {
  for (const auto& ex : pool.examples()) {
    nlohmann::json obj = {{"id", ex.id}, {"text", ex.text}, {"tags", ex.tags}};
    obj["answer"] = ex.answer ? nlohmann::json(*ex.answer) : nlohmann::json(nullptr);
    out << obj.dump() << '\n';
  }
}

/// Reads {"id", "vector"} records and aligns them to the pool. The dimension
/// comes from the first record; ids outside the pool are skipped.
inline EmbeddingTable read_embeddings(std::istream& in, const Pool& pool,
                                      const std::string& source = "embeddings") {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<bool> seen(pool.size(), false);
  std::set<std::string> reported;
  detail::for_each_jsonl(in, [&](const nlohmann::json& obj, std::size_t line_no) {
    auto id = obj.find("id");
    auto vec = obj.find("vector");
    if (id == obj.end() || !id->is_string() || vec == obj.end() || !vec->is_array())
      throw Error(ErrorCode::MalformedLine, std::to_string(line_no));
    const auto key = id->get<std::string>();
    detail::warn_unknown_keys(obj, {"id", "vector"}, reported, source);
    if (dim == 0) {
      dim = vec->size();
      if (dim == 0) throw Error(ErrorCode::DimMismatch, "first vector is empty");
      values.assign(pool.size() * dim, 0.0);
    } else if (vec->size() != dim) {
      throw Error(ErrorCode::DimMismatch,
                  "expected " + std::to_string(dim) + ", got " + std::to_string(vec->size()));
    }
    auto pos = pool.find(key);
    if (!pos) {
      warn(source + ": id '" + key + "' is not in the pool; skipped");
      return;
    }
    if (seen[*pos]) throw Error(ErrorCode::DuplicateId, key);
    seen[*pos] = true;
    for (std::size_t d = 0; d < dim; ++d) {
      const auto& v = (*vec)[d];
      if (!v.is_number()) throw Error(ErrorCode::MalformedLine, std::to_string(line_no));
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, key);
      values[*pos * dim + d] = x;
    }
  });
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!seen[i]) throw Error(ErrorCode::MissingId, pool[i].id);
  return EmbeddingTable(dim, std::move(values));
}

inline EmbeddingTable load_embeddings(const std::string& path, const Pool& pool) {
  auto in = detail::open_input(path);
  return read_embeddings(in, pool, path);
}

}  // namespace sess

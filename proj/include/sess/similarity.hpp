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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sess/corpus.hpp"
#include "sess/error.hpp"
#include "sess/parallel.hpp"

namespace sess {

/// Symmetric n x n matrix of pairwise similarities in [0, 1], row-major.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;

  /// Validates shape, range and symmetry (within 1e-12).
  SimilarityMatrix(std::size_t n, std::vector<double> entries)
      : n_(n), entries_(std::move(entries)) {
    if (entries_.size() != n_ * n_)
      throw Error(ErrorCode::SizeMismatch, "expected " + std::to_string(n_ * n_) +
                                               " entries, got " +
                                               std::to_string(entries_.size()));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = (*this)(i, j);
        if (!(v >= 0.0 && v <= 1.0))
          throw Error(ErrorCode::InvalidArgument,
                      "similarity (" + std::to_string(i) + "," + std::to_string(j) +
                          ") outside [0,1]");
        if (std::abs(v - (*this)(j, i)) > 1e-12)
          throw Error(ErrorCode::InvalidArgument,
                      "similarity not symmetric at (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
      }
    }
  }

  /// Skips validation. Only for deliberately invalid inputs, e.g. showing
  /// that negative similarities break submodularity.
  static SimilarityMatrix unchecked(std::size_t n, std::vector<double> entries) {
    SimilarityMatrix m;
    m.n_ = n;
    m.entries_ = std::move(entries);
    return m;
  }

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }
  std::span<const double> data() const noexcept { return entries_; }

  friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

/// (1 + cos(v_i, v_j)) / 2 for every pair. Each entry is computed on its own,
/// so the result does not depend on the thread count.
inline SimilarityMatrix dense_similarity(const EmbeddingTable& emb, const Pool* pool = nullptr,
                                         unsigned threads = 1) {
  const std::size_t n = emb.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double x : emb.row(i)) sq += x * x;
    norms[i] = std::sqrt(sq);
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i]))
      throw Error(ErrorCode::ZeroNormVector,
                  pool ? (*pool)[i].id : "position " + std::to_string(i));
  }
  std::vector<double> entries(n * n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto vi = emb.row(i);
    entries[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto vj = emb.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < vi.size(); ++d) dot += vi[d] * vj[d];
      const double cos = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      const double s = (1.0 + cos) / 2.0;
      entries[i * n + j] = s;
      entries[j * n + i] = s;
    }
  });
  return SimilarityMatrix(n, std::move(entries));
}

namespace detail {

// Decodes one UTF-8 code point starting at text[i] and advances i. Invalid
// bytes decode as U+FFFD.
inline char32_t next_code_point(std::string_view text, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  const unsigned char lead = byte(i);
  std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3
                                     : (lead >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || i + len > text.size()) {
    ++i;
    return 0xFFFD;
  }
  char32_t cp = len == 1 ? lead : lead & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) {
    if ((byte(i + k) & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (byte(i + k) & 0x3F);
  }
  i += len;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Non-ASCII code points count as word characters unless they fall in a
// punctuation, symbol or space block.
inline bool is_word_char(char32_t cp) {
  if (cp < 0x80)
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB2 || cp == 0xB3 || cp == 0xB5 ||
                         cp == 0xB9 || cp == 0xBA || cp == 0xBC || cp == 0xBD || cp == 0xBE;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, arrows, math operators
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0xFF1A && cp <= 0xFF20) return false;
  if (cp == 0xFEFF || cp == 0xFFFD) return false;
  return true;
}

inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace detail

/// Lowercases and splits on every non-alphanumeric character. Empty tokens
/// are dropped; there is no stemming or stopword removal.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = detail::next_code_point(text, i);
    if (detail::is_word_char(cp)) {
      detail::append_utf8(current, detail::to_lower(cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// Sparse L2-normalized TF-IDF vectors: raw term counts times the smoothed
/// idf ln((1 + N) / (1 + df)) + 1. Terms are sorted by id.
struct TfidfModel {
  std::vector<std::string> vocabulary;
  std::vector<double> idf;
  std::vector<std::vector<std::pair<std::size_t, double>>> documents;
};

inline TfidfModel build_tfidf(const Pool& pool) {
  TfidfModel model;
  std::map<std::string, std::size_t> term_ids;
  std::vector<std::map<std::size_t, double>> counts(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto tokens = tokenize(pool[i].text);
    if (tokens.empty()) throw Error(ErrorCode::EmptyTokenization, pool[i].id);
    for (const auto& tok : tokens) {
      auto [it, inserted] = term_ids.emplace(tok, term_ids.size());
      counts[i][it->second] += 1.0;
    }
  }
  model.vocabulary.resize(term_ids.size());
  for (const auto& [term, id] : term_ids) model.vocabulary[id] = term;
  std::vector<std::size_t> df(term_ids.size(), 0);
  for (const auto& doc : counts)
    for (const auto& [term, c] : doc) ++df[term];
  const double n = static_cast<double>(pool.size());
  model.idf.resize(df.size());
  for (std::size_t t = 0; t < df.size(); ++t)
    model.idf[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[t]))) + 1.0;
  model.documents.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto& doc = model.documents[i];
    double sq = 0.0;
    for (const auto& [term, c] : counts[i]) {
      const double w = c * model.idf[term];
      doc.emplace_back(term, w);
      sq += w * w;
    }
    const double norm = std::sqrt(sq);
    for (auto& [term, w] : doc) w /= norm;
  }
  return model;
}

/// sqrt(clamp01(cosine)) of TF-IDF vectors; the diagonal is exactly 1.
inline SimilarityMatrix tfidf_similarity(const Pool& pool, unsigned threads = 1) {
  const auto model = build_tfidf(pool);
  const std::size_t n = pool.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> postings(model.vocabulary.size());
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [term, w] : model.documents[i]) postings[term].emplace_back(i, w);

  std::vector<double> entries(n * n, 0.0);
  // Row i accumulates over its own terms in ascending term id; entry (j, i)
  // sees the same products in the same order, so the result is symmetric.
  parallel_for(n, threads, [&](std::size_t i) {
    double* row = entries.data() + i * n;
    for (const auto& [term, w] : model.documents[i])
      for (const auto& [j, wj] : postings[term]) row[j] += w * wj;
    for (std::size_t j = 0; j < n; ++j) row[j] = std::sqrt(std::clamp(row[j], 0.0, 1.0));
    row[i] = 1.0;
  });
  return SimilarityMatrix(n, std::move(entries));
}

/// alpha * dense + (1 - alpha) * lexical, entrywise.
inline SimilarityMatrix mix(const SimilarityMatrix& dense, const SimilarityMatrix& lexical,
                            double alpha) {
  if (dense.size() != lexical.size())
    throw Error(ErrorCode::SizeMismatch, std::to_string(dense.size()) + " vs " +
                                             std::to_string(lexical.size()));
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::AlphaOutOfRange, std::to_string(alpha));
  if (alpha == 1.0) return dense;
  if (alpha == 0.0) return lexical;
  const auto a = dense.data();
  const auto b = lexical.data();
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    // The convex combination can round a hair outside [min, max]; pin it.
    const double v = alpha * a[k] + (1.0 - alpha) * b[k];
    out[k] = std::clamp(v, std::min(a[k], b[k]), std::max(a[k], b[k]));
  }
  return SimilarityMatrix(dense.size(), std::move(out));
}

// ---------------------------------------------------------------------------
// Binary cache: "SESSM1", u64 n (little endian), n*n little-endian f64.
// A JSON sidecar at <path>.json records how the matrix was built.

inline constexpr std::string_view kCacheMagic = "SESSM1";

inline void write_similarity_cache(const std::string& path, const SimilarityMatrix& m,
                                   const nlohmann::json& sidecar) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  const auto put_u64 = [&](std::uint64_t v) {
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
    out.write(bytes, 8);
  };
  out.write(kCacheMagic.data(), static_cast<std::streamsize>(kCacheMagic.size()));
  put_u64(m.size());
  for (double v : m.data()) put_u64(std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path);

  std::ofstream side(path + ".json");
  if (!side) throw Error(ErrorCode::Io, "cannot write " + path + ".json");
  side << sidecar.dump(2) << '\n';
}

inline SimilarityMatrix read_similarity_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  char magic[6];
  in.read(magic, 6);
  if (!in || std::string_view(magic, 6) != kCacheMagic)
    throw Error(ErrorCode::MalformedCache, path + ": bad header");
  const auto get_u64 = [&] {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw Error(ErrorCode::MalformedCache, path + ": truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t{bytes[b]} << (8 * b);
    return v;
  };
  const std::uint64_t n = get_u64();
  if (n == 0 || n > (1u << 20)) throw Error(ErrorCode::MalformedCache, path + ": bad size");
  std::vector<double> entries(n * n);
  for (auto& v : entries) v = std::bit_cast<double>(get_u64());
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::MalformedCache, path + ": trailing bytes");
  try {
    return SimilarityMatrix(n, std::move(entries));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedCache, path + ": " + e.detail());
  }
}

}  // namespace sess

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

#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "golden_verbal.hpp"
#include "sess/confidence.hpp"
#include "sess/random.hpp"
#include "test_util.hpp"

namespace sess {
namespace {

Pool pool_of(std::initializer_list<const char*> ids) {
  std::vector<Example> ex;
  for (auto id : ids) ex.push_back({id, std::string("question ") + id, {}, {}});
  return Pool(std::move(ex));
}

TEST(ParseVerbal, FourGuessReplyTakesMax) {
  const auto r = parse_verbal_response("G1: 72\nP1: 0.6\nG2: 68\nP2: 0.2\nG3: 70\nP3: 0.1\nG4: 1\nP4: 0.05\n");
  EXPECT_EQ(r.confidence, 0.6);
  EXPECT_EQ(r.parsed, 4u);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(ParseVerbal, SingleLineAndClamp) {
  EXPECT_EQ(parse_verbal_response("P1: 1.0").confidence, 1.0);
  const auto r = parse_verbal_response("P1: 1.7");
  EXPECT_EQ(r.confidence, 1.0);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("clamped"), std::string::npos);
}

TEST(ParseVerbal, GuessLinesAreIgnored) {
  // A guess that looks like a probability must not count.
  EXPECT_EQ(parse_verbal_response("G1: 0.99\nP1: 0.4").confidence, 0.4);
}

TEST(ParseVerbal, Errors) {
  try {
    parse_verbal_response("I think it is 4.");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoProbabilityFound);
  }
  try {
    parse_verbal_response("G1: a\nP1: n/a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnparseableProbability);
    EXPECT_EQ(e.detail(), "2");
  }
}

TEST(ParseVerbal, PermutationInvariant) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> lines;
    const std::size_t k = 1 + rng.below(6);
    for (std::size_t i = 0; i < k; ++i) {
      std::ostringstream s;
      s << "P" << i + 1 << ": " << rng.uniform();
      lines.push_back(s.str());
    }
    const auto join = [&] {
      std::string out;
      for (const auto& l : lines) out += l + "\n";
      return out;
    };
    const double first = parse_verbal_response(join()).confidence;
    for (std::size_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[rng.below(i)]);
    EXPECT_EQ(parse_verbal_response(join()).confidence, first);
  }
}

TEST(ParseVerbal, GoldenReplies) {
  const auto outcomes = testing::run_verbal_goldens(SESS_GOLDEN_DIR "/verbal");
  EXPECT_GE(outcomes.size(), 10u);
  for (const auto& o : outcomes) EXPECT_TRUE(o.ok) << o.file << ": " << o.message;
}

TEST(LoadVerbalReplies, ReadsOneFilePerId) {
  testing::TempDir dir;
  dir.write("a.txt", "P1: 0.6\nP2: 0.2");
  dir.write("b.txt", "P1: 0.2");
  testing::WarningCapture quiet;
  const auto raw = load_verbal_replies(dir.path(), pool_of({"a", "b"}));
  EXPECT_EQ(raw.source, ConfidenceSource::Verbal);
  EXPECT_EQ(raw.values, (std::vector<double>{0.6, 0.2}));
  const auto norm = normalize(raw);
  EXPECT_EQ(norm.values, (std::vector<double>{1.0, 0.0}));

  try {
    load_verbal_replies(dir.path(), pool_of({"a", "b", "c"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteCoverage);
    EXPECT_EQ(e.detail(), "c");
  }
}

TEST(LoglikConfidence, LengthNormalizedMean) {
  EXPECT_EQ(mean_logprob(std::vector<double>{-1.0, -3.0}, "x"), -2.0);
  EXPECT_EQ(mean_logprob(std::vector<double>{0.0}, "x"), 0.0);
  try {
    mean_logprob({}, "q7");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyAnswerTokens);
    EXPECT_EQ(e.detail(), "q7");
  }
}

TEST(LoglikConfidence, PreservesPoolOrder) {
  const auto pool = pool_of({"a", "b", "c"});
  const std::vector<LogprobRecord> records = {
      {"b", {-0.5}}, {"c", {-1.0, -1.2}}, {"a", {-2.0, -2.6}}};
  const auto raw = loglik_confidence(records, pool);
  ASSERT_EQ(raw.values.size(), 3u);
  EXPECT_DOUBLE_EQ(raw.values[0], -2.3);
  EXPECT_DOUBLE_EQ(raw.values[1], -0.5);
  EXPECT_DOUBLE_EQ(raw.values[2], -1.1);
  EXPECT_THROW(loglik_confidence(std::vector<LogprobRecord>{{"a", {-1}}}, pool), Error);
}

TEST(LoglikConfidence, ReadsJsonl) {
  std::istringstream in(R"({"id": "a", "answer_token_logprobs": [-1.0, -3.0], "mode": "echo"})");
  const auto recs = read_logprob_records(in);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].answer_token_logprobs, (std::vector<double>{-1.0, -3.0}));
}

TEST(Normalize, MinMax) {
  const auto c = normalize({ConfidenceSource::Loglik, {-2.3, -0.5, -1.1}});
  EXPECT_EQ(c.values[0], 0.0);
  EXPECT_EQ(c.values[1], 1.0);
  EXPECT_NEAR(c.values[2], 2.0 / 3.0, 1e-12);
  EXPECT_EQ(normalize({ConfidenceSource::Verbal, {0.6, 0.2}}).values, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(normalize({ConfidenceSource::Verbal, {0.5, 0.5, 0.5}}).values,
            (std::vector<double>{0.5, 0.5, 0.5}));
}

TEST(Normalize, RejectsInvalidInput) {
  EXPECT_THROW(normalize({ConfidenceSource::Loglik, {}}), Error);
  EXPECT_THROW(normalize({ConfidenceSource::Verbal, {0.2, 1.2}}), Error);
  EXPECT_THROW(normalize({ConfidenceSource::Loglik, {0.2, std::nan("")}}), Error);
}

TEST(Normalize, OrderPreservingAndInRange) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    RawConfidence raw{ConfidenceSource::Loglik, std::vector<double>(2 + rng.below(20))};
    for (auto& v : raw.values) v = -10.0 * rng.uniform();
    const auto c = normalize(raw);
    for (std::size_t i = 0; i < raw.values.size(); ++i) {
      EXPECT_GE(c[i], 0.0);
      EXPECT_LE(c[i], 1.0);
      for (std::size_t j = 0; j < raw.values.size(); ++j)
        if (raw.values[i] < raw.values[j]) {
          EXPECT_LE(c[i], c[j]);
        }
    }
  }
}

TEST(ComputeWeights, Examples) {
  const ConfidenceVector conf{{0.0, 0.2, 0.7, 1.0}};
  for (double w : compute_weights(conf, 0.0).values) EXPECT_EQ(w, 1.0);
  EXPECT_NEAR(compute_weights(ConfidenceVector{{0.2}}, 0.5)[0], 0.9, 1e-15);
  EXPECT_EQ(compute_weights(ConfidenceVector{{1.0}}, 1.0)[0], 0.0);
  try {
    compute_weights(conf, -0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LambdaOutOfRange);
  }
}

TEST(ComputeWeights, BoundedAndDecreasing) {
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    const double lambda = rng.uniform();
    const double a = rng.uniform();
    const double b = rng.uniform();
    const auto w = compute_weights(ConfidenceVector{{a, b}}, lambda);
    for (double x : w.values) {
      EXPECT_GE(x, 1.0 - lambda - 1e-15);
      EXPECT_LE(x, 1.0 + 1e-15);
    }
    if (a < b) {
      EXPECT_GE(w[0], w[1]);
    }
  }
}

TEST(ConfidenceFile, RoundTripAndValidation) {
  const auto pool = pool_of({"a", "b"});
  std::ostringstream out;
  write_confidences(out, {ConfidenceSource::Verbal, {0.25, 0.75}}, pool);
  std::istringstream in(out.str());
  const auto raw = read_confidences(in, pool);
  EXPECT_EQ(raw.source, ConfidenceSource::Verbal);
  EXPECT_EQ(raw.values, (std::vector<double>{0.25, 0.75}));

  std::istringstream mixed(R"({"id": "a", "raw": 0.1, "source": "verbal"})"
                           "\n"
                           R"({"id": "b", "raw": -1, "source": "loglik"})");
  EXPECT_THROW(read_confidences(mixed, pool), Error);
  std::istringstream partial(R"({"id": "a", "raw": 0.1, "source": "verbal"})");
  try {
    read_confidences(partial, pool);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteCoverage);
  }
}

}  // namespace
}  // namespace sess

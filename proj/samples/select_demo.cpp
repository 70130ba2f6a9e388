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

// Selects a 3-example evaluation subset from the sample pool with each
// objective and prints the picks.
//
//   ./select_demo samples/pool.jsonl samples/embeddings.jsonl samples/confidences.jsonl

#include <iostream>
#include <memory>

#include "sess/sess.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: select_demo POOL EMBEDDINGS CONFIDENCES\n";
    return 2;
  }
  try {
    const auto pool = sess::load_pool(argv[1]);
    const auto emb = sess::load_embeddings(argv[2], pool);
    const auto sim = std::make_shared<sess::SimilarityMatrix>(
        sess::mix(sess::dense_similarity(emb, &pool), sess::tfidf_similarity(pool), 0.7));
    const auto conf = sess::normalize(sess::load_confidences(argv[3], pool));

    sess::SelectionConfig config;
    config.budget = 3;
    const auto show = [&](const char* name, const sess::Objective& objective,
                          sess::Algorithm algorithm) {
      config.algorithm = algorithm;
      config.objective_label = name;
      const auto r = sess::select(objective, config);
      std::cout << name << ":";
      for (std::size_t i = 0; i < r.chosen.size(); ++i)
        std::cout << ' ' << pool[r.chosen[i]].id << " (+" << r.gains[i] << ")";
      std::cout << "  F=" << r.final_value << '\n';
    };
    show("rep", sess::Objective::rep(sim), sess::Algorithm::Lazy);
    show("lc", sess::Objective::lc(conf), sess::Algorithm::Topk);
    show("wrep", sess::Objective::wrep(sim, sess::compute_weights(conf, 0.5)),
         sess::Algorithm::Lazy);
  } catch (const sess::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

#include "semcom/eval.hpp"

#include "semcom/error.hpp"

namespace semcom {

ScoreResult score_corpus(const std::vector<std::vector<std::string>>& candidates,
                         const std::vector<std::vector<std::string>>& references,
                         SimilarityProvider& provider) {
  if (candidates.size() != references.size()) {
    throw ContractError("score_corpus: candidate/reference count mismatch");
  }
  ScoreResult result;
  result.bleu = corpus_bleu(candidates, references);
  if (candidates.empty()) {
    result.similarity_provider = provider.name();
    return result;
  }

  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
  pairs.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    pairs.emplace_back(candidates[i], references[i]);
  }

  std::vector<double> scores;
  result.similarity_provider = provider.name();
  try {
    scores = provider.score_pairs(pairs);
  } catch (const std::exception& e) {
    result.warnings.push_back("similarity provider '" + provider.name() +
                              "' failed, falling back to lexical: " + e.what());
    LexicalSimilarity fallback;
    result.similarity_provider = fallback.name();
    scores = fallback.score_pairs(pairs);
  }
  double acc = 0.0;
  for (double s : scores) acc += s;
  result.similarity = acc / static_cast<double>(scores.size());
  return result;
}

}  // namespace semcom

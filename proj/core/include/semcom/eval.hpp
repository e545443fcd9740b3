#pragma once

#include <string>
#include <vector>

#include "semcom/bleu.hpp"
#include "semcom/similarity.hpp"

namespace semcom {

struct ScoreResult {
  BleuReport bleu;
  double similarity = 0.0;
  std::string similarity_provider;     // provider actually used
  std::vector<std::string> warnings;   // e.g. fallback notices
};

// Sentence-level BLEU and mean similarity over candidate/reference pairs.
// When the provider fails (e.g. the embedding service is unreachable) the
// scoring falls back to the lexical provider and records a warning.
ScoreResult score_corpus(const std::vector<std::vector<std::string>>& candidates,
                         const std::vector<std::vector<std::string>>& references,
                         SimilarityProvider& provider);

}  // namespace semcom

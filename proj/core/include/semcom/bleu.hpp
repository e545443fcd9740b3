#pragma once

#include <string>
#include <vector>

namespace semcom {

// Sentence-level BLEU-n: modified n-gram precision with clipping times the
// brevity penalty exp(1 - r/c) when the candidate is shorter than the
// reference. A candidate with zero n-gram matches (but at least one n-gram)
// is floored at 1/(2 * candidate n-gram count) instead of zero.
double bleu_n(const std::vector<std::string>& candidate,
              const std::vector<std::string>& reference, int n);

struct BleuReport {
  double bleu[4] = {0.0, 0.0, 0.0, 0.0};  // n = 1..4
  double avg_bleu = 0.0;                  // arithmetic mean of the four
  int sentence_count = 0;
};

// Sentence-level scores averaged over the corpus.
BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references);

}  // namespace semcom

#include "semcom/bleu.hpp"

#include <cmath>
#include <map>

#include "semcom/error.hpp"

namespace semcom {

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::vector<std::string> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(i) + n);
    ++counts[std::move(gram)];
  }
  return counts;
}

}  // namespace

double bleu_n(const std::vector<std::string>& candidate,
              const std::vector<std::string>& reference, int n) {
  if (n < 1 || n > 4) throw ContractError("bleu_n: n must be in 1..4");
  if (candidate.empty()) return 0.0;
  const int cand_ngrams = static_cast<int>(candidate.size()) - n + 1;
  if (cand_ngrams <= 0) return 0.0;

  const auto cand_counts = count_ngrams(candidate, n);
  const auto ref_counts = count_ngrams(reference, n);
  int matched = 0;
  for (const auto& [gram, count] : cand_counts) {
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) matched += std::min(count, it->second);
  }
  const double precision =
      matched > 0 ? static_cast<double>(matched) / cand_ngrams : 0.5 / cand_ngrams;

  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return brevity * precision;
}

BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size()) {
    throw ContractError("corpus_bleu: candidate/reference count mismatch");
  }
  BleuReport report;
  report.sentence_count = static_cast<int>(candidates.size());
  if (candidates.empty()) return report;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (int n = 1; n <= 4; ++n) {
      report.bleu[n - 1] += bleu_n(candidates[i], references[i], n);
    }
  }
  for (auto& b : report.bleu) b /= static_cast<double>(candidates.size());
  report.avg_bleu = (report.bleu[0] + report.bleu[1] + report.bleu[2] + report.bleu[3]) / 4.0;
  return report;
}

}  // namespace semcom

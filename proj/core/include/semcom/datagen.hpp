#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semcom {

// Deterministic generator of parliamentary-debate-style English sentences,
// one per line, for desk-scale experiments without external data.
struct CorpusGenOptions {
  int sentences = 2000;
  std::uint64_t seed = 7;
  int min_words = 4;
  int max_words = 16;
};

std::vector<std::string> generate_corpus(const CorpusGenOptions& opts);

}  // namespace semcom

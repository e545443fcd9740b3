#include "semcom/datagen.hpp"

#include "semcom/error.hpp"
#include "semcom/rng.hpp"

namespace semcom {

namespace {

const char* kDeterminers[] = {"the", "this", "that", "every", "our", "their", "a"};

const char* kAdjectives[] = {
    "new",      "european", "national",      "important", "common",   "economic",
    "social",   "financial", "regional",     "political", "public",   "internal",
    "general",  "special",  "annual",        "joint",     "technical", "modern",
    "local",    "future",   "environmental", "industrial", "digital",  "practical"};

const char* kNouns[] = {
    "parliament", "commission",  "council",     "committee",  "proposal",   "report",
    "policy",     "market",      "budget",      "programme",  "agreement",  "directive",
    "regulation", "strategy",    "debate",      "decision",   "procedure",  "amendment",
    "resolution", "initiative",  "framework",   "development", "cooperation", "employment",
    "environment", "energy",     "transport",   "research",   "education",  "security",
    "union",      "state",       "member",      "citizen",    "region",     "country",
    "government", "institution", "reform",      "measure",    "investment", "agriculture",
    "industry",   "trade",       "protection",  "growth",     "funding",    "majority"};

const char* kVerbs[] = {
    "supports",  "rejects",   "welcomes",   "considers", "examines", "adopts",
    "presents",  "discusses", "requires",   "proposes",  "approves", "concerns",
    "improves",  "protects",  "promotes",   "strengthens", "addresses", "confirms",
    "endorses",  "reviews",   "implements", "monitors",  "guarantees", "evaluates"};

const char* kAdverbs[] = {"clearly",  "strongly", "fully",    "rapidly",  "carefully",
                          "urgently", "finally",  "however",  "therefore", "moreover",
                          "broadly",  "formally"};

const char* kPreps[] = {"on", "in", "for", "with", "about", "under", "across", "during"};

template <std::size_t N>
const char* pick(const char* (&pool)[N], Rng& rng) {
  return pool[rng.uniform_below(N)];
}

void noun_phrase(std::vector<std::string>& words, Rng& rng) {
  words.push_back(pick(kDeterminers, rng));
  if (rng.uniform() < 0.55) words.push_back(pick(kAdjectives, rng));
  words.push_back(pick(kNouns, rng));
  if (rng.uniform() < 0.18) {
    words.push_back("of");
    words.push_back(pick(kDeterminers, rng));
    words.push_back(pick(kNouns, rng));
  }
}

void prep_phrase(std::vector<std::string>& words, Rng& rng) {
  words.push_back(pick(kPreps, rng));
  noun_phrase(words, rng);
}

void clause(std::vector<std::string>& words, Rng& rng) {
  if (rng.uniform() < 0.25) {
    words.push_back(pick(kAdverbs, rng));
    words.push_back(",");
  }
  noun_phrase(words, rng);
  words.push_back(pick(kVerbs, rng));
  noun_phrase(words, rng);
  if (rng.uniform() < 0.45) prep_phrase(words, rng);
}

int word_count(const std::vector<std::string>& words) {
  int n = 0;
  for (const auto& w : words) {
    if (w != "," && w != ".") ++n;
  }
  return n;
}

}  // namespace

std::vector<std::string> generate_corpus(const CorpusGenOptions& opts) {
  if (opts.sentences < 1) throw ConfigError("generate_corpus: need at least one sentence");
  if (opts.min_words < 1 || opts.min_words > opts.max_words) {
    throw ConfigError("generate_corpus: bad word-count window");
  }
  Rng rng(opts.seed);
  std::vector<std::string> lines;
  lines.reserve(static_cast<std::size_t>(opts.sentences));
  while (static_cast<int>(lines.size()) < opts.sentences) {
    std::vector<std::string> words;
    clause(words, rng);
    if (rng.uniform() < 0.3) {
      words.push_back("and");
      clause(words, rng);
    }
    words.push_back(".");
    const int n = word_count(words);
    if (n < opts.min_words || n > opts.max_words) continue;
    std::string line;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) line.push_back(' ');
      line += words[i];
    }
    lines.push_back(line);
  }
  return lines;
}

}  // namespace semcom

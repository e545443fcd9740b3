#include "semcom/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "semcom/error.hpp"
#include "semcom/rng.hpp"

namespace semcom::corpus {

namespace {

bool is_word_char(unsigned char c) {
  // Multi-byte UTF-8 continuations stay inside words.
  return std::isalnum(c) || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
    if (!std::isspace(c)) {
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw DataError("vocabulary: id " + std::to_string(id) + " out of range (size " +
                    std::to_string(size()) + ")");
  }
  return id_to_token[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences,
                             int max_size) {
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s) ++counts[t];
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.id_to_token = {"<pad>", "<start>", "<end>", "<unk>"};
  const std::size_t keep =
      max_size > kReserved ? static_cast<std::size_t>(max_size - kReserved) : ranked.size();
  for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) {
    v.id_to_token.push_back(ranked[i].first);
  }
  for (int i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[static_cast<std::size_t>(i)]] = i;
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  for (int i = 0; i < size(); ++i) {
    out << id_to_token[static_cast<std::size_t>(i)] << '\t' << i << '\n';
  }
  if (!out) throw IoError("failed while writing vocabulary file: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("vocabulary file " + path + ": missing tab on line " +
                      std::to_string(line_no));
    }
    const std::string token = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id != static_cast<int>(v.id_to_token.size())) {
      throw DataError("vocabulary file " + path + ": non-sequential id on line " +
                      std::to_string(line_no));
    }
    v.id_to_token.push_back(token);
  }
  if (v.size() < kReserved) {
    throw DataError("vocabulary file " + path + ": fewer than 4 reserved entries");
  }
  for (int i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[static_cast<std::size_t>(i)]] = i;
  return v;
}

SplitResult filter_and_split(const std::vector<std::vector<std::string>>& sentences,
                             int min_len, int max_len, double split_ratio,
                             std::uint64_t seed) {
  if (min_len < 1 || min_len > max_len) {
    throw ConfigError("filter_and_split: bad length window [" + std::to_string(min_len) + ", " +
                      std::to_string(max_len) + "]");
  }
  if (split_ratio < 0.0 || split_ratio > 1.0) {
    throw ConfigError("filter_and_split: split ratio must be in [0, 1]");
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const int n = static_cast<int>(sentences[i].size());
    if (n >= min_len && n <= max_len) kept.push_back(i);
  }
  if (kept.empty()) {
    throw DataError("filter_and_split: no sentences with length in [" + std::to_string(min_len) +
                    ", " + std::to_string(max_len) + "]");
  }
  Rng rng(seed);
  rng.shuffle(kept);
  const auto n_train = static_cast<std::size_t>(
      std::llround(split_ratio * static_cast<double>(kept.size())));
  SplitResult out;
  out.train.reserve(n_train);
  out.test.reserve(kept.size() - n_train);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    (i < n_train ? out.train : out.test).push_back(sentences[kept[i]]);
  }
  return out;
}

std::vector<int> to_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
  return ids;
}

std::vector<std::string> to_tokens(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int id : ids) tokens.push_back(vocab.token_of(id));
  return tokens;
}

TokenBatch make_batch(const std::vector<std::vector<int>>& sentences_ids) {
  if (sentences_ids.empty()) throw ContractError("make_batch: empty batch");
  const int B = static_cast<int>(sentences_ids.size());
  int max_framed = 0;
  for (const auto& s : sentences_ids) {
    max_framed = std::max(max_framed, static_cast<int>(s.size()) + 2);
  }
  TokenBatch tb;
  tb.ids.rows = B;
  tb.ids.cols = max_framed;
  tb.ids.ids.assign(static_cast<std::size_t>(B) * max_framed, Vocabulary::kPad);
  tb.pad_mask.assign(static_cast<std::size_t>(B) * max_framed, 0);
  tb.lengths.resize(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const auto& s = sentences_ids[static_cast<std::size_t>(b)];
    const std::size_t base = static_cast<std::size_t>(b) * max_framed;
    tb.ids.ids[base] = Vocabulary::kStart;
    for (std::size_t i = 0; i < s.size(); ++i) tb.ids.ids[base + 1 + i] = s[i];
    tb.ids.ids[base + 1 + s.size()] = Vocabulary::kEnd;
    const int framed = static_cast<int>(s.size()) + 2;
    tb.lengths[static_cast<std::size_t>(b)] = framed;
    for (int i = 0; i < framed; ++i) tb.pad_mask[base + static_cast<std::size_t>(i)] = 1;
  }
  return tb;
}

std::vector<TokenBatch> batch(const std::vector<std::vector<std::string>>& sentences,
                              const Vocabulary& vocab, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch: batch size must be >= 1");
  std::vector<TokenBatch> out;
  std::vector<std::vector<int>> ids;
  ids.reserve(static_cast<std::size_t>(batch_size));
  for (const auto& s : sentences) {
    ids.push_back(to_ids(s, vocab));
    if (static_cast<int>(ids.size()) == batch_size) {
      out.push_back(make_batch(ids));
      ids.clear();
    }
  }
  if (!ids.empty()) out.push_back(make_batch(ids));
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("failed while writing file: " + path);
}

}  // namespace semcom::corpus

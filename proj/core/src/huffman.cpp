#include "semcom/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>

#include "semcom/error.hpp"

namespace semcom {

namespace {

constexpr int kEowChar = 256;  // end-of-word marker in the escape alphabet

// Code lengths from the classic two-queue Huffman construction with
// deterministic tie-breaking on (frequency, first symbol index).
std::vector<int> huffman_lengths(const std::vector<std::int64_t>& freqs) {
  const std::size_t n = freqs.size();
  if (n == 0) throw ContractError("huffman: empty alphabet");
  if (n == 1) return {1};

  struct Item {
    std::int64_t freq;
    std::size_t order;  // smallest contained leaf index, for determinism
    int node;
  };
  auto cmp = [](const Item& a, const Item& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    return a.order > b.order;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> heap(cmp);

  std::vector<std::pair<int, int>> children;  // internal nodes
  for (std::size_t i = 0; i < n; ++i) {
    heap.push(Item{freqs[i], i, static_cast<int>(i)});
  }
  int next_node = static_cast<int>(n);
  while (heap.size() > 1) {
    Item a = heap.top();
    heap.pop();
    Item b = heap.top();
    heap.pop();
    children.emplace_back(a.node, b.node);
    heap.push(Item{a.freq + b.freq, std::min(a.order, b.order), next_node});
    ++next_node;
  }

  std::vector<int> depth(static_cast<std::size_t>(next_node), 0);
  for (int node = next_node - 1; node >= static_cast<int>(n); --node) {
    const auto& [l, r] = children[static_cast<std::size_t>(node - static_cast<int>(n))];
    depth[static_cast<std::size_t>(l)] = depth[static_cast<std::size_t>(node)] + 1;
    depth[static_cast<std::size_t>(r)] = depth[static_cast<std::size_t>(node)] + 1;
  }
  depth.resize(n);
  return depth;
}

BitVec code_from_value(std::uint64_t value, int length) {
  BitVec bits(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((value >> (length - 1 - i)) & 1);
  }
  return bits;
}

std::string bits_to_string(const BitVec& bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

BitVec bits_from_string(const std::string& s) {
  BitVec bits;
  bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw DataError("huffman codebook: bad bitstring " + s);
    bits.push_back(c == '1' ? 1 : 0);
  }
  return bits;
}

}  // namespace

std::vector<BitVec> HuffmanCodebook::canonical_codes(const std::vector<std::int64_t>& freqs) {
  const auto lengths = huffman_lengths(freqs);
  // Canonical assignment: symbols ordered by (length, index).
  std::vector<std::size_t> order(freqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&lengths](std::size_t a, std::size_t b) {
    if (lengths[a] != lengths[b]) return lengths[a] < lengths[b];
    return a < b;
  });
  std::vector<BitVec> codes(freqs.size());
  std::uint64_t value = 0;
  int prev_len = lengths[order[0]];
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t sym = order[rank];
    value <<= (lengths[sym] - prev_len);
    prev_len = lengths[sym];
    codes[sym] = code_from_value(value, lengths[sym]);
    ++value;
  }
  return codes;
}

HuffmanCodebook HuffmanCodebook::build(
    const std::vector<std::vector<std::string>>& sentences) {
  if (sentences.empty()) throw DataError("huffman: empty training corpus");
  std::map<std::string, std::int64_t> counts;  // ordered for determinism
  std::int64_t char_counts[257] = {0};
  for (const auto& s : sentences) {
    for (const auto& tok : s) {
      ++counts[tok];
      for (unsigned char c : tok) ++char_counts[c];
      ++char_counts[kEowChar];
    }
  }

  HuffmanCodebook cb;
  for (const auto& [tok, freq] : counts) {
    cb.word_symbols_.push_back(tok);
    cb.word_freqs_.push_back(freq);
  }
  // Escape and end-of-sentence pseudo-symbols. The angle-bracket names can
  // never collide with tokenizer output (brackets split into single chars).
  cb.escape_symbol_ = static_cast<int>(cb.word_symbols_.size());
  cb.word_symbols_.push_back("<esc>");
  cb.word_freqs_.push_back(1);
  cb.eos_symbol_ = static_cast<int>(cb.word_symbols_.size());
  cb.word_symbols_.push_back("<eos>");
  cb.word_freqs_.push_back(static_cast<std::int64_t>(sentences.size()));

  const auto codes = canonical_codes(cb.word_freqs_);
  for (std::size_t i = 0; i < cb.word_symbols_.size(); ++i) {
    cb.word_codes_[cb.word_symbols_[i]] = codes[i];
  }
  cb.escape_code_ = codes[static_cast<std::size_t>(cb.escape_symbol_)];
  cb.eos_code_ = codes[static_cast<std::size_t>(cb.eos_symbol_)];

  std::vector<std::int64_t> cf(257);
  for (int i = 0; i < 257; ++i) cf[static_cast<std::size_t>(i)] = char_counts[i] + 1;
  cb.char_codes_ = canonical_codes(cf);

  cb.build_tries();
  return cb;
}

void HuffmanCodebook::build_tries() {
  auto insert = [](std::vector<TrieNode>& trie, const BitVec& bits, int symbol) {
    if (trie.empty()) trie.emplace_back();
    int node = 0;
    for (auto b : bits) {
      int& next = trie[static_cast<std::size_t>(node)].child[b];
      if (next < 0) {
        next = static_cast<int>(trie.size());
        trie.emplace_back();
      }
      node = next;
    }
    trie[static_cast<std::size_t>(node)].symbol = symbol;
  };
  word_trie_.clear();
  for (std::size_t i = 0; i < word_symbols_.size(); ++i) {
    insert(word_trie_, word_codes_.at(word_symbols_[i]), static_cast<int>(i));
  }
  char_trie_.clear();
  for (int c = 0; c <= kEowChar; ++c) {
    insert(char_trie_, char_codes_[static_cast<std::size_t>(c)], c);
  }
}

BitVec HuffmanCodebook::encode(const std::vector<std::string>& tokens) const {
  BitVec out;
  for (const auto& tok : tokens) {
    auto it = word_codes_.find(tok);
    if (it != word_codes_.end() && tok != "<esc>" && tok != "<eos>") {
      out.insert(out.end(), it->second.begin(), it->second.end());
      continue;
    }
    if (char_codes_.empty()) {
      throw DataError("huffman: token '" + tok + "' missing and no escape path");
    }
    out.insert(out.end(), escape_code_.begin(), escape_code_.end());
    for (unsigned char c : tok) {
      const auto& code = char_codes_[c];
      out.insert(out.end(), code.begin(), code.end());
    }
    const auto& eow = char_codes_[kEowChar];
    out.insert(out.end(), eow.begin(), eow.end());
  }
  return out;
}

std::vector<std::string> HuffmanCodebook::decode(const BitVec& bits) const {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < bits.size()) {
    int node = 0;
    // Walk the word trie until a symbol or the end of the stream.
    while (pos < bits.size() && word_trie_[static_cast<std::size_t>(node)].symbol < 0) {
      node = word_trie_[static_cast<std::size_t>(node)].child[bits[pos]];
      ++pos;
      if (node < 0) return tokens;  // unreachable for a full canonical code
    }
    const int symbol = word_trie_[static_cast<std::size_t>(node)].symbol;
    if (symbol < 0) return tokens;  // trailing incomplete codeword
    if (symbol == eos_symbol_) return tokens;
    if (symbol != escape_symbol_) {
      tokens.push_back(word_symbols_[static_cast<std::size_t>(symbol)]);
      continue;
    }
    // Escape: character codes up to the end-of-word marker.
    std::string word;
    for (;;) {
      int cnode = 0;
      while (pos < bits.size() && char_trie_[static_cast<std::size_t>(cnode)].symbol < 0) {
        cnode = char_trie_[static_cast<std::size_t>(cnode)].child[bits[pos]];
        ++pos;
        if (cnode < 0) return tokens;
      }
      const int c = char_trie_[static_cast<std::size_t>(cnode)].symbol;
      if (c < 0) return tokens;  // ran out mid-character
      if (c == kEowChar) break;
      word.push_back(static_cast<char>(c));
    }
    if (!word.empty()) tokens.push_back(word);
  }
  return tokens;
}

bool HuffmanCodebook::prefix_free() const {
  std::vector<const BitVec*> all;
  all.reserve(word_symbols_.size());
  for (const auto& s : word_symbols_) all.push_back(&word_codes_.at(s));
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (i == j) continue;
      const auto& a = *all[i];
      const auto& b = *all[j];
      if (a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin())) return false;
    }
  }
  return true;
}

double HuffmanCodebook::mean_code_length() const {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < word_symbols_.size(); ++i) {
    const double f = static_cast<double>(word_freqs_[i]);
    num += f * static_cast<double>(word_codes_.at(word_symbols_[i]).size());
    den += f;
  }
  return num / den;
}

double HuffmanCodebook::source_entropy() const {
  double total = 0.0;
  for (auto f : word_freqs_) total += static_cast<double>(f);
  double h = 0.0;
  for (auto f : word_freqs_) {
    const double p = static_cast<double>(f) / total;
    h -= p * std::log2(p);
  }
  return h;
}

void HuffmanCodebook::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write codebook: " + path);
  out << "# semcom huffman codebook v1\n";
  for (std::size_t i = 0; i < word_symbols_.size(); ++i) {
    out << word_symbols_[i] << '\t' << bits_to_string(word_codes_.at(word_symbols_[i]))
        << '\t' << word_freqs_[i] << '\n';
  }
  out << "#chars\n";
  for (int c = 0; c <= kEowChar; ++c) {
    out << c << '\t' << bits_to_string(char_codes_[static_cast<std::size_t>(c)]) << '\n';
  }
  if (!out) throw IoError("failed while writing codebook: " + path);
}

HuffmanCodebook HuffmanCodebook::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read codebook: " + path);
  HuffmanCodebook cb;
  cb.char_codes_.resize(257);
  std::string line;
  bool in_chars = false;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line == "# semcom huffman codebook v1") {
      seen_header = true;
      continue;
    }
    if (line == "#chars") {
      in_chars = true;
      continue;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("codebook " + path + ": malformed line");
    if (!in_chars) {
      const auto tab2 = line.find('\t', tab + 1);
      if (tab2 == std::string::npos) throw DataError("codebook " + path + ": malformed line");
      const std::string tok = line.substr(0, tab);
      cb.word_symbols_.push_back(tok);
      cb.word_codes_[tok] = bits_from_string(line.substr(tab + 1, tab2 - tab - 1));
      cb.word_freqs_.push_back(std::stoll(line.substr(tab2 + 1)));
      if (tok == "<esc>") cb.escape_symbol_ = static_cast<int>(cb.word_symbols_.size()) - 1;
      if (tok == "<eos>") cb.eos_symbol_ = static_cast<int>(cb.word_symbols_.size()) - 1;
    } else {
      const int c = std::stoi(line.substr(0, tab));
      if (c < 0 || c > kEowChar) throw DataError("codebook " + path + ": bad char code");
      cb.char_codes_[static_cast<std::size_t>(c)] = bits_from_string(line.substr(tab + 1));
    }
  }
  if (!seen_header || cb.escape_symbol_ < 0 || cb.eos_symbol_ < 0) {
    throw DataError("codebook " + path + ": missing header or reserved symbols");
  }
  cb.escape_code_ = cb.word_codes_.at("<esc>");
  cb.eos_code_ = cb.word_codes_.at("<eos>");
  cb.build_tries();
  return cb;
}

}  // namespace semcom

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace semcom {

using BitVec = std::vector<std::uint8_t>;

// Word-level canonical Huffman codebook with a character-level escape path
// for out-of-vocabulary tokens and an end-of-sentence marker.
class HuffmanCodebook {
 public:
  // Frequencies from the training corpus; deterministic for a fixed corpus.
  static HuffmanCodebook build(const std::vector<std::vector<std::string>>& sentences);

  // Prefix-free encoding of one token sequence (no terminator).
  BitVec encode(const std::vector<std::string>& tokens) const;

  // Greedy prefix decoding; stops at the end-of-sentence marker or when the
  // remaining bits no longer form a complete symbol (trailing bits dropped).
  std::vector<std::string> decode(const BitVec& bits) const;

  const BitVec& eos_bits() const { return eos_code_; }

  // True when no codeword is a prefix of another (checked exhaustively).
  bool prefix_free() const;

  // Average codeword length weighted by the build-time frequencies.
  double mean_code_length() const;
  // Shannon entropy of the same distribution, bits per symbol.
  double source_entropy() const;

  bool contains(const std::string& token) const { return word_codes_.count(token) > 0; }
  std::size_t vocabulary_size() const { return word_codes_.size(); }

  // `token<TAB>bitstring` text, with a `#chars` section for the escape path.
  void save(const std::string& path) const;
  static HuffmanCodebook load(const std::string& path);

 private:
  struct TrieNode {
    int child[2] = {-1, -1};
    int symbol = -1;
  };

  void build_tries();
  static std::vector<BitVec> canonical_codes(const std::vector<std::int64_t>& freqs);

  std::unordered_map<std::string, BitVec> word_codes_;
  std::vector<std::string> word_symbols_;        // aligned with word freqs
  std::vector<std::int64_t> word_freqs_;
  BitVec escape_code_;
  BitVec eos_code_;
  std::vector<BitVec> char_codes_;               // 256 bytes + end-of-word marker
  std::vector<TrieNode> word_trie_;
  std::vector<TrieNode> char_trie_;
  int escape_symbol_ = -1;
  int eos_symbol_ = -1;
};

}  // namespace semcom

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom::corpus {

// Word-level tokenizer: lowercases ASCII, splits punctuation into standalone
// tokens, and collapses whitespace.
std::vector<std::string> tokenize(const std::string& text);
std::string detokenize(const std::vector<std::string>& tokens);

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return static_cast<int>(id_to_token.size()); }
  // Unknown tokens map to kUnk.
  int id_of(const std::string& token) const;
  const std::string& token_of(int id) const;

  // Keeps the `max_size - 4` most frequent tokens (ties broken
  // lexicographically); max_size <= 0 keeps everything.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences,
                          int max_size = 0);

  // Line-oriented `token<TAB>id` text format.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

struct SplitResult {
  std::vector<std::vector<std::string>> train;
  std::vector<std::vector<std::string>> test;
};

// Keeps sentences whose token count lies in [min_len, max_len], then shuffles
// deterministically and splits train/test by `split_ratio`.
SplitResult filter_and_split(const std::vector<std::vector<std::string>>& sentences,
                             int min_len, int max_len, double split_ratio,
                             std::uint64_t seed);

// Padded id batch framed as [START, tokens..., END, PAD...].
struct TokenBatch {
  IdMatrix ids;                        // [B x L_max]
  std::vector<int> lengths;            // framed lengths, per sentence
  std::vector<std::uint8_t> pad_mask;  // B*L_max, true exactly at non-PAD

  int batch() const { return ids.rows; }
  int max_len() const { return ids.cols; }
};

std::vector<int> to_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab);
std::vector<std::string> to_tokens(const std::vector<int>& ids, const Vocabulary& vocab);

// Builds one framed, padded batch from unframed id sequences.
TokenBatch make_batch(const std::vector<std::vector<int>>& sentences_ids);

// Tokens -> framed batches of at most `batch_size` sentences, in order.
std::vector<TokenBatch> batch(const std::vector<std::vector<std::string>>& sentences,
                              const Vocabulary& vocab, int batch_size);

// One sentence per line, UTF-8. Throws IoError with the path on failure.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace semcom::corpus

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "semcom/corpus.hpp"
#include "semcom/datagen.hpp"
#include "semcom/error.hpp"
#include "support/test_util.hpp"

using namespace semcom;
using corpus::Vocabulary;

TEST_CASE("tokenize splits punctuation and lowercases") {
  CHECK(corpus::tokenize("Hello, world.") ==
        std::vector<std::string>{"hello", ",", "world", "."});
  CHECK(corpus::tokenize("").empty());
  CHECK(corpus::tokenize("a a a") == std::vector<std::string>{"a", "a", "a"});
}

TEST_CASE("detokenize/tokenize round-trips up to normalization") {
  CorpusGenOptions opts;
  opts.sentences = 50;
  opts.seed = 3;
  for (const auto& line : generate_corpus(opts)) {
    const auto tokens = corpus::tokenize(line);
    CHECK(corpus::tokenize(corpus::detokenize(tokens)) == tokens);
  }
}

TEST_CASE("filter_and_split windows and determinism") {
  std::vector<std::vector<std::string>> sentences = {
      {"a", "b", "c"},                       // 3 tokens: excluded at default window
      {"a", "b", "c", "d"},                  // 4: kept
      {"w", "x", "y", "z", "q"},             // 5: kept
      {"1", "2", "3", "4", "5", "6", "7"}};  // 7: kept
  auto split = corpus::filter_and_split(sentences, 4, 36, 0.5, 7);
  CHECK(split.train.size() + split.test.size() == 3);

  // disjoint and union == filtered set
  auto all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  CHECK(all.size() == 3);
  for (const auto& s : all) CHECK(s.size() >= 4);

  auto split2 = corpus::filter_and_split(sentences, 4, 36, 0.5, 7);
  CHECK(split.train == split2.train);
  CHECK(split.test == split2.test);

  CHECK_THROWS_AS(corpus::filter_and_split(sentences, 30, 36, 0.5, 7), DataError);
}

TEST_CASE("long-sentence window excludes short sentences") {
  std::vector<std::vector<std::string>> sentences;
  sentences.push_back(std::vector<std::string>(36, "w"));
  sentences.push_back(std::vector<std::string>(37, "w"));
  sentences.push_back(std::vector<std::string>(100, "w"));
  auto split = corpus::filter_and_split(sentences, 37, 100, 1.0, 1);
  CHECK(split.train.size() == 2);
}

TEST_CASE("vocabulary build, truncation, and reserved ids") {
  std::vector<std::vector<std::string>> sentences = {{"b", "a", "b"}, {"c", "b", "a"}};
  auto vocab = Vocabulary::build(sentences);
  CHECK(vocab.id_of("<pad>") == Vocabulary::kPad);
  CHECK(vocab.id_of("<start>") == Vocabulary::kStart);
  CHECK(vocab.id_of("<end>") == Vocabulary::kEnd);
  CHECK(vocab.id_of("<unk>") == Vocabulary::kUnk);
  CHECK(vocab.id_of("b") == 4);  // most frequent first
  CHECK(vocab.id_of("a") == 5);
  CHECK(vocab.id_of("zzz") == Vocabulary::kUnk);

  auto truncated = Vocabulary::build(sentences, 5);
  CHECK(truncated.size() == 5);
  CHECK(truncated.id_of("b") == 4);
  CHECK(truncated.id_of("a") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary built twice is identical; save/load round-trips") {
  CorpusGenOptions opts;
  opts.sentences = 200;
  opts.seed = 11;
  std::vector<std::vector<std::string>> sentences;
  for (const auto& line : generate_corpus(opts)) sentences.push_back(corpus::tokenize(line));

  auto v1 = Vocabulary::build(sentences, 500);
  auto v2 = Vocabulary::build(sentences, 500);
  CHECK(v1.id_to_token == v2.id_to_token);

  testutil::TempDir tmp("vocab");
  v1.save(tmp.str("vocab.tsv"));
  auto v3 = Vocabulary::load(tmp.str("vocab.tsv"));
  CHECK(v1.id_to_token == v3.id_to_token);
}

TEST_CASE("batch framing, padding, and UNK mapping") {
  std::vector<std::vector<std::string>> sentences = {{"a", "b"}};
  auto vocab = Vocabulary::build(sentences);
  auto batches = corpus::batch(sentences, vocab, 8);
  REQUIRE(batches.size() == 1);
  const auto& tb = batches[0];
  CHECK(tb.batch() == 1);
  CHECK(tb.max_len() == 4);
  CHECK(tb.ids.at(0, 0) == Vocabulary::kStart);
  CHECK(tb.ids.at(0, 1) == vocab.id_of("a"));
  CHECK(tb.ids.at(0, 2) == vocab.id_of("b"));
  CHECK(tb.ids.at(0, 3) == Vocabulary::kEnd);

  auto unk_batches = corpus::batch({{"zzz"}}, vocab, 8);
  CHECK(unk_batches[0].ids.at(0, 1) == Vocabulary::kUnk);

  // lengths 4 and 6 -> L_max = 8 after framing
  std::vector<std::vector<std::string>> two = {{"a", "a", "a", "a"},
                                               {"b", "b", "b", "b", "b", "b"}};
  auto two_batches = corpus::batch(two, vocab, 8);
  REQUIRE(two_batches.size() == 1);
  CHECK(two_batches[0].max_len() == 8);
  CHECK(two_batches[0].lengths[0] == 6);
  CHECK(two_batches[0].lengths[1] == 8);
  // padding beyond each sentence is PAD with mask false
  CHECK(two_batches[0].ids.at(0, 6) == Vocabulary::kPad);
  CHECK(two_batches[0].pad_mask[6] == 0);
  CHECK(two_batches[0].pad_mask[8 + 7] == 1);
}

TEST_CASE("generated corpus respects the word-count window") {
  CorpusGenOptions opts;
  opts.sentences = 300;
  opts.seed = 5;
  opts.min_words = 4;
  opts.max_words = 16;
  const auto lines = generate_corpus(opts);
  CHECK(lines.size() == 300);
  // deterministic
  CHECK(generate_corpus(opts) == lines);
  for (const auto& line : lines) {
    int words = 0;
    for (const auto& tok : corpus::tokenize(line)) {
      if (tok != "," && tok != ".") ++words;
    }
    CHECK(words >= 4);
    CHECK(words <= 16);
  }
}

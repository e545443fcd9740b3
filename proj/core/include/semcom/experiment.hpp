#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/baseline.hpp"
#include "semcom/channel.hpp"
#include "semcom/corpus.hpp"
#include "semcom/eval.hpp"
#include "semcom/semcodec.hpp"
#include "semcom/trainer.hpp"

namespace semcom {

struct ExperimentConfig {
  // data preparation
  std::string corpus_path;
  std::string data_dir;
  int min_len = 4;
  int max_len = 36;
  int vocab_limit = 22000;
  double split_ratio = 0.9;
  std::uint64_t split_seed = 13;

  // sweep
  std::vector<ChannelKind> channels{ChannelKind::kAwgn};
  std::vector<double> snrs_db{0, 3, 6, 9, 12, 15, 18};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> schemes{"proposed", "huffman_turbo"};
  int eval_limit = 0;  // 0: whole test set
  int workers = 1;
  TurboConfig turbo;

  void validate_sweep() const;
  // Canonical string fed into the config hash.
  std::string canonical() const;
  std::string config_hash() const;
};

struct ExperimentRecord {
  std::string scheme;
  std::string channel;
  double snr_db = 0.0;
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  double avg_bleu = 0.0;
  double similarity = 0.0;
  int n_sentences = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// CSV schema:
// scheme,channel,snr_db,bleu1,bleu2,bleu3,bleu4,avg_bleu,similarity,n_sentences,seed,config_hash
void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(const std::string& path);

struct PrepareResult {
  int total_lines = 0;
  int non_empty = 0;
  int kept = 0;
  int excluded = 0;
  int train_count = 0;
  int test_count = 0;
  int vocab_size = 0;
  std::string manifest_path;
  std::string config_hash;
};

// Reads the corpus, filters by the length window, splits train/test, builds
// the vocabulary from the training split only, and writes vocab.tsv,
// train.txt, test.txt and manifest.json into data_dir.
PrepareResult prepare_data(const ExperimentConfig& cfg);

// Transmits the test set for every (scheme, channel, snr, seed) combination
// and scores it. Deterministic per combination regardless of worker count.
std::vector<ExperimentRecord> run_sweep(const ExperimentConfig& cfg, const ModelConfig& mcfg,
                                        const ModelParams& params,
                                        const std::vector<std::vector<std::string>>& train_sents,
                                        const std::vector<std::vector<std::string>>& test_sents,
                                        const corpus::Vocabulary& vocab,
                                        SimilarityProvider& provider);

// Single-sentence transmission through the trained codec at the given
// channel configuration; returns the decoded tokens.
std::vector<std::string> transmit_sentence(const std::vector<std::string>& tokens,
                                           const ModelConfig& mcfg, const ModelParams& params,
                                           const corpus::Vocabulary& vocab, ChannelKind kind,
                                           double snr_db, Rng& rng);

}  // namespace semcom

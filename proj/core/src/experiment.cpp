#include "semcom/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "semcom/error.hpp"

namespace semcom {

namespace fs = std::filesystem;

void ExperimentConfig::validate_sweep() const {
  if (snrs_db.empty()) throw ConfigError("sweep: SNR list is empty");
  if (!std::is_sorted(snrs_db.begin(), snrs_db.end())) {
    throw ConfigError("sweep: SNR list must be sorted ascending");
  }
  if (schemes.empty()) throw ConfigError("sweep: scheme list is empty");
  for (const auto& s : schemes) {
    if (s != "proposed" && s != "huffman_turbo") {
      throw ConfigError("sweep: unknown scheme '" + s + "'");
    }
  }
  if (channels.empty()) throw ConfigError("sweep: channel list is empty");
  if (seeds.empty()) throw ConfigError("sweep: seed list is empty");
  if (workers < 1) throw ConfigError("sweep: worker count must be >= 1");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "corpus=" << corpus_path << ";window=" << min_len << "-" << max_len
     << ";vocab=" << vocab_limit << ";ratio=" << split_ratio << ";split_seed=" << split_seed
     << ";channels=";
  for (auto c : channels) os << to_string(c) << ",";
  os << ";snrs=";
  for (auto s : snrs_db) os << s << ",";
  os << ";seeds=";
  for (auto s : seeds) os << s << ",";
  os << ";schemes=";
  for (const auto& s : schemes) os << s << ",";
  os << ";eval_limit=" << eval_limit << ";turbo=" << turbo.block_length << "/"
     << turbo.iterations << "/" << turbo.interleaver_seed;
  return os.str();
}

std::string ExperimentConfig::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return std::string(buf);
}

void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write results: " + path);
  out << "scheme,channel,snr_db,bleu1,bleu2,bleu3,bleu4,avg_bleu,similarity,"
         "n_sentences,seed,config_hash\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%g,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%d,%llu,%s\n", r.scheme.c_str(),
                  r.channel.c_str(), r.snr_db, r.bleu1, r.bleu2, r.bleu3, r.bleu4, r.avg_bleu,
                  r.similarity, r.n_sentences, static_cast<unsigned long long>(r.seed),
                  r.config_hash.c_str());
    out << buf;
  }
  if (!out) throw IoError("failed while writing results: " + path);
}

std::vector<ExperimentRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read results: " + path);
  std::vector<ExperimentRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 12) {
      throw DataError("results " + path + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected 12");
    }
    try {
      ExperimentRecord r;
      r.scheme = fields[0];
      r.channel = fields[1];
      r.snr_db = std::stod(fields[2]);
      r.bleu1 = std::stod(fields[3]);
      r.bleu2 = std::stod(fields[4]);
      r.bleu3 = std::stod(fields[5]);
      r.bleu4 = std::stod(fields[6]);
      r.avg_bleu = std::stod(fields[7]);
      r.similarity = std::stod(fields[8]);
      r.n_sentences = std::stoi(fields[9]);
      r.seed = std::stoull(fields[10]);
      r.config_hash = fields[11];
      records.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError("results " + path + ": unparseable numeric field on line " +
                      std::to_string(line_no));
    }
  }
  return records;
}

PrepareResult prepare_data(const ExperimentConfig& cfg) {
  const auto lines = corpus::read_lines(cfg.corpus_path);
  PrepareResult res;
  res.total_lines = static_cast<int>(lines.size());

  std::vector<std::vector<std::string>> sentences;
  for (const auto& line : lines) {
    auto toks = corpus::tokenize(line);
    if (toks.empty()) continue;
    sentences.push_back(std::move(toks));
  }
  res.non_empty = static_cast<int>(sentences.size());
  if (sentences.empty()) throw DataError("prepare: corpus is empty: " + cfg.corpus_path);

  const auto split = corpus::filter_and_split(sentences, cfg.min_len, cfg.max_len,
                                              cfg.split_ratio, cfg.split_seed);
  res.kept = static_cast<int>(split.train.size() + split.test.size());
  res.excluded = res.non_empty - res.kept;
  res.train_count = static_cast<int>(split.train.size());
  res.test_count = static_cast<int>(split.test.size());

  const auto vocab = corpus::Vocabulary::build(split.train, cfg.vocab_limit);
  res.vocab_size = vocab.size();
  res.config_hash = cfg.config_hash();

  fs::create_directories(cfg.data_dir);
  vocab.save((fs::path(cfg.data_dir) / "vocab.tsv").string());
  std::vector<std::string> train_lines, test_lines;
  train_lines.reserve(split.train.size());
  for (const auto& s : split.train) train_lines.push_back(corpus::detokenize(s));
  for (const auto& s : split.test) test_lines.push_back(corpus::detokenize(s));
  corpus::write_lines((fs::path(cfg.data_dir) / "train.txt").string(), train_lines);
  corpus::write_lines((fs::path(cfg.data_dir) / "test.txt").string(), test_lines);

  nlohmann::ordered_json manifest;
  manifest["corpus"] = cfg.corpus_path;
  manifest["length_window"] = {cfg.min_len, cfg.max_len};
  manifest["vocab_limit"] = cfg.vocab_limit;
  manifest["split_ratio"] = cfg.split_ratio;
  manifest["split_seed"] = cfg.split_seed;
  manifest["counts"] = {{"total_lines", res.total_lines},
                        {"non_empty", res.non_empty},
                        {"kept", res.kept},
                        {"excluded", res.excluded},
                        {"train", res.train_count},
                        {"test", res.test_count}};
  manifest["vocab_size"] = res.vocab_size;
  manifest["config_hash"] = res.config_hash;
  res.manifest_path = (fs::path(cfg.data_dir) / "manifest.json").string();
  std::ofstream mout(res.manifest_path);
  if (!mout) throw IoError("cannot write manifest: " + res.manifest_path);
  mout << manifest.dump(2) << "\n";
  return res;
}

std::vector<std::string> transmit_sentence(const std::vector<std::string>& tokens,
                                           const ModelConfig& mcfg, const ModelParams& params,
                                           const corpus::Vocabulary& vocab, ChannelKind kind,
                                           double snr_db, Rng& rng) {
  corpus::TokenBatch batch = corpus::make_batch({corpus::to_ids(tokens, vocab)});
  Tensor memory = encode(batch, params, mcfg);
  SymbolFrame frame = channel_encode(memory, batch.pad_mask, params.chan_enc, mcfg);
  const ChannelRealization real = draw_realization(kind, snr_db, 1, rng);
  frame = equalize(transmit(frame, real, rng), real);
  Tensor received = channel_decode(frame, params.chan_dec, mcfg);
  const int max_len = std::min(mcfg.max_positions - 1, batch.max_len() + 8);
  const auto ids = greedy_decode(received, batch.pad_mask, params, mcfg, max_len);
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id == corpus::Vocabulary::kPad || id == corpus::Vocabulary::kStart) continue;
    out.push_back(vocab.token_of(id));
  }
  return out;
}

namespace {

struct SweepPoint {
  std::string scheme;
  ChannelKind channel;
  double snr_db;
  std::uint64_t seed;
};

}  // namespace

std::vector<ExperimentRecord> run_sweep(const ExperimentConfig& cfg, const ModelConfig& mcfg,
                                        const ModelParams& params,
                                        const std::vector<std::vector<std::string>>& train_sents,
                                        const std::vector<std::vector<std::string>>& test_sents,
                                        const corpus::Vocabulary& vocab,
                                        SimilarityProvider& provider) {
  cfg.validate_sweep();
  if (test_sents.empty()) throw DataError("sweep: empty test set");

  std::vector<std::vector<std::string>> eval_set = test_sents;
  if (cfg.eval_limit > 0 && static_cast<int>(eval_set.size()) > cfg.eval_limit) {
    eval_set.resize(static_cast<std::size_t>(cfg.eval_limit));
  }

  const bool want_baseline =
      std::find(cfg.schemes.begin(), cfg.schemes.end(), "huffman_turbo") != cfg.schemes.end();
  std::unique_ptr<BaselineChain> baseline;
  if (want_baseline) {
    if (train_sents.empty()) throw DataError("sweep: baseline needs the training sentences");
    baseline = std::make_unique<BaselineChain>(BaselineChain::build(train_sents, cfg.turbo));
  }

  std::vector<SweepPoint> points;
  for (const auto& scheme : cfg.schemes) {
    for (auto channel : cfg.channels) {
      for (double snr : cfg.snrs_db) {
        for (auto seed : cfg.seeds) {
          points.push_back(SweepPoint{scheme, channel, snr, seed});
        }
      }
    }
  }

  const std::string hash = cfg.config_hash();
  std::vector<ExperimentRecord> records(points.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto run_point = [&](std::size_t idx) {
    const auto& pt = points[idx];
    // Stream derivation keeps each point deterministic regardless of the
    // worker that picks it up.
    std::string stream = pt.scheme + "|" + to_string(pt.channel) + "|" +
                         std::to_string(pt.snr_db) + "|" + std::to_string(pt.seed);
    Rng rng(fnv1a64(stream) ^ pt.seed);

    std::vector<std::vector<std::string>> decoded;
    decoded.reserve(eval_set.size());
    if (pt.scheme == "proposed") {
      for (const auto& sent : eval_set) {
        decoded.push_back(
            transmit_sentence(sent, mcfg, params, vocab, pt.channel, pt.snr_db, rng));
      }
    } else {
      decoded = baseline->run(eval_set, pt.channel, pt.snr_db, rng);
    }
    const ScoreResult score = score_corpus(decoded, eval_set, provider);
    ExperimentRecord r;
    r.scheme = pt.scheme;
    r.channel = to_string(pt.channel);
    r.snr_db = pt.snr_db;
    r.bleu1 = score.bleu.bleu[0];
    r.bleu2 = score.bleu.bleu[1];
    r.bleu3 = score.bleu.bleu[2];
    r.bleu4 = score.bleu.bleu[3];
    r.avg_bleu = score.bleu.avg_bleu;
    r.similarity = score.similarity;
    r.n_sentences = score.bleu.sentence_count;
    r.seed = pt.seed;
    r.config_hash = hash;
    records[idx] = std::move(r);
  };

  if (cfg.workers <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    const int n_workers = std::min<int>(cfg.workers, static_cast<int>(points.size()));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= points.size() || failed.load()) return;
          try {
            run_point(i);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!failed.exchange(true)) first_error = e.what();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw Error("sweep worker failed: " + first_error);
  }

  std::sort(records.begin(), records.end(),
            [](const ExperimentRecord& a, const ExperimentRecord& b) {
              if (a.scheme != b.scheme) return a.scheme < b.scheme;
              if (a.channel != b.channel) return a.channel < b.channel;
              if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
              return a.seed < b.seed;
            });
  return records;
}

}  // namespace semcom

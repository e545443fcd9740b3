#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/corpus.hpp"
#include "semcom/semcodec.hpp"

namespace semcom {

// Per-batch training SNR. `uniform:<lo>:<hi>` samples uniformly in dB,
// `fixed:<db>` pins one value, `noiseless` disables the noise entirely.
struct SnrPolicy {
  enum class Kind { kFixed, kUniform, kNoiseless };
  Kind kind = Kind::kUniform;
  double fixed_db = 10.0;
  double lo_db = 0.0;
  double hi_db = 20.0;

  double sample(Rng& rng) const;
  std::string str() const;
  static SnrPolicy parse(const std::string& text);
  static SnrPolicy noiseless();
  static SnrPolicy fixed(double db);
  static SnrPolicy uniform(double lo, double hi);
};

struct TrainConfig {
  double learning_rate = 5e-4;
  int batch_size = 256;
  int epochs = 80;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm; 0 disables clipping
  SnrPolicy snr;
  ChannelKind channel = ChannelKind::kAwgn;
  std::uint64_t seed = 1;
  std::string checkpoint_path;      // empty: keep the result in memory only
  int checkpoint_every_steps = 0;   // 0: only the final checkpoint
  int max_steps = 0;                // 0: run all epochs
  bool bypass_channel = false;      // plain autoencoder (no transmit at all)
  int log_every = 0;                // 0: silent; otherwise stderr progress

  void validate() const;
};

struct LossRecord {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;
  double snr_db = 0.0;
};

// CSV with header `step,epoch,loss,snr_db`.
void write_loss_history(const std::string& path, const std::vector<LossRecord>& history);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

// One Adam update with bias correction. `grads` and `names` are aligned with
// ModelParams::for_each order; a NaN gradient aborts, naming the parameter.
void adam_step(ModelParams& params, const std::vector<Tensor>& grads,
               const std::vector<std::string>& names, AdamState& state,
               const TrainConfig& cfg);

// Masked mean cross entropy given logits [B x L x V] against the target ids.
Tensor sequence_loss(const Tensor& logits, const IdMatrix& targets,
                     const std::vector<std::uint8_t>& target_mask);

struct TrainResult {
  ModelParams params;
  std::vector<LossRecord> history;
};

// End-to-end teacher-forced training: encode -> channel_encode -> channel ->
// channel_decode -> decode, minimizing the masked cross entropy.
TrainResult train(const std::vector<std::vector<int>>& train_sentences,
                  const ModelConfig& mcfg, const TrainConfig& tcfg);

}  // namespace semcom

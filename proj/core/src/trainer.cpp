#include "semcom/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "semcom/checkpoint.hpp"
#include "semcom/error.hpp"

namespace semcom {

double SnrPolicy::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kFixed:
      return fixed_db;
    case Kind::kUniform:
      return rng.uniform(lo_db, hi_db);
    case Kind::kNoiseless:
      return std::numeric_limits<double>::infinity();
  }
  return fixed_db;
}

std::string SnrPolicy::str() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::kFixed:
      os << "fixed:" << fixed_db;
      break;
    case Kind::kUniform:
      os << "uniform:" << lo_db << ":" << hi_db;
      break;
    case Kind::kNoiseless:
      os << "noiseless";
      break;
  }
  return os.str();
}

SnrPolicy SnrPolicy::parse(const std::string& text) {
  if (text == "noiseless") return noiseless();
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("bad SNR policy: " + text);
  const std::string head = text.substr(0, colon);
  try {
    if (head == "fixed") {
      return fixed(std::stod(text.substr(colon + 1)));
    }
    if (head == "uniform") {
      const auto rest = text.substr(colon + 1);
      const auto colon2 = rest.find(':');
      if (colon2 == std::string::npos) throw ConfigError("bad SNR policy: " + text);
      return uniform(std::stod(rest.substr(0, colon2)), std::stod(rest.substr(colon2 + 1)));
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad SNR policy: " + text);
  }
  throw ConfigError("bad SNR policy: " + text);
}

SnrPolicy SnrPolicy::noiseless() {
  SnrPolicy p;
  p.kind = Kind::kNoiseless;
  return p;
}

SnrPolicy SnrPolicy::fixed(double db) {
  SnrPolicy p;
  p.kind = Kind::kFixed;
  p.fixed_db = db;
  return p;
}

SnrPolicy SnrPolicy::uniform(double lo, double hi) {
  if (lo > hi) throw ConfigError("bad SNR range");
  SnrPolicy p;
  p.kind = Kind::kUniform;
  p.lo_db = lo;
  p.hi_db = hi;
  return p;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning rate must be positive");
  if (batch_size < 1) throw ConfigError("train config: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (clip_norm < 0.0) throw ConfigError("train config: clip norm must be >= 0");
}

void write_loss_history(const std::string& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss history: " + path);
  out << "step,epoch,loss,snr_db\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%g\n", r.step, r.epoch, r.loss, r.snr_db);
    out << buf;
  }
  if (!out) throw IoError("failed while writing loss history: " + path);
}

void adam_step(ModelParams& params, const std::vector<Tensor>& grads,
               const std::vector<std::string>& names, AdamState& state,
               const TrainConfig& cfg) {
  std::size_t count = 0;
  params.for_each([&count](const std::string&, Tensor&) { ++count; });
  if (grads.size() != count || names.size() != count) {
    throw ContractError("adam_step: gradient list does not match parameter list");
  }
  if (state.m.empty()) {
    state.m.resize(count);
    state.v.resize(count);
    std::size_t i = 0;
    params.for_each([&](const std::string&, Tensor& t) {
      state.m[i].assign(static_cast<std::size_t>(t.size()), 0.0);
      state.v[i].assign(static_cast<std::size_t>(t.size()), 0.0);
      ++i;
    });
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  std::size_t i = 0;
  params.for_each([&](const std::string& name, Tensor& t) {
    const auto& g = grads[i].data();
    if (grads[i].shape() != t.shape()) {
      throw ContractError("adam_step: gradient shape mismatch for " + name);
    }
    for (double gv : g) {
      if (std::isnan(gv)) {
        throw NumericalError("adam_step: NaN gradient for parameter " + names[i]);
      }
    }
    auto& m = state.m[i];
    auto& v = state.v[i];
    std::vector<double> w = t.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
    t = Tensor::from_data(t.shape(), std::move(w));
    ++i;
  });
}

Tensor sequence_loss(const Tensor& logits, const IdMatrix& targets,
                     const std::vector<std::uint8_t>& target_mask) {
  return cross_entropy_with_logits(logits, targets, target_mask);
}

namespace {

// Split a framed batch into decoder input (columns 0..L-2) and shifted
// targets (columns 1..L-1) for teacher forcing.
struct TeacherForcing {
  IdMatrix decoder_ids;
  std::vector<std::uint8_t> decoder_mask;
  IdMatrix targets;
  std::vector<std::uint8_t> target_mask;
};

TeacherForcing teacher_forcing_views(const corpus::TokenBatch& batch) {
  const int B = batch.batch(), L = batch.max_len();
  if (L < 2) throw ContractError("teacher forcing needs framed sequences of length >= 2");
  TeacherForcing tf;
  tf.decoder_ids.rows = B;
  tf.decoder_ids.cols = L - 1;
  tf.decoder_ids.ids.resize(static_cast<std::size_t>(B) * (L - 1));
  tf.targets = tf.decoder_ids;
  tf.decoder_mask.resize(tf.decoder_ids.ids.size());
  tf.target_mask.resize(tf.decoder_ids.ids.size());
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < L - 1; ++i) {
      const std::size_t src = static_cast<std::size_t>(b) * L;
      const std::size_t dst = static_cast<std::size_t>(b) * (L - 1) + i;
      tf.decoder_ids.ids[dst] = batch.ids.ids[src + i];
      tf.decoder_mask[dst] = batch.pad_mask[src + i];
      tf.targets.ids[dst] = batch.ids.ids[src + i + 1];
      tf.target_mask[dst] = batch.pad_mask[src + i + 1];
    }
  }
  return tf;
}

}  // namespace

TrainResult train(const std::vector<std::vector<int>>& train_sentences,
                  const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  if (train_sentences.empty()) throw DataError("train: empty training set");

  Rng rng(tcfg.seed);
  ModelParams params = init_params(mcfg, rng);
  AdamState adam;

  std::vector<std::string> names;
  params.for_each([&names](const std::string& n, Tensor&) { names.push_back(n); });

  std::vector<std::size_t> order(train_sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  int step = 0;
  bool done = false;
  std::string last_checkpoint;

  for (int epoch = 1; epoch <= tcfg.epochs && !done; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size() && !done;
         start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      std::vector<std::vector<int>> chunk;
      chunk.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        chunk.push_back(train_sentences[order[i]]);
      }
      corpus::TokenBatch batch = corpus::make_batch(chunk);
      const auto tf = teacher_forcing_views(batch);
      const double snr_db = tcfg.snr.sample(rng);

      Tape tape;
      ModelParams live = params.tracked(tape);
      Tensor memory = encode(batch, live, mcfg);
      SymbolFrame frame = channel_encode(memory, batch.pad_mask, live.chan_enc, mcfg);
      if (!tcfg.bypass_channel) {
        ChannelRealization real =
            draw_realization(tcfg.channel, snr_db, batch.batch(), rng);
        frame = apply_channel(frame, real, rng);
      }
      Tensor received = channel_decode(frame, live.chan_dec, mcfg);
      Tensor logits = decode_forward(received, batch.pad_mask, tf.decoder_ids,
                                     tf.decoder_mask, live, mcfg);
      Tensor loss = sequence_loss(logits, tf.targets, tf.target_mask);
      const double loss_value = loss.value();
      if (!std::isfinite(loss_value)) {
        throw NumericalError("train: non-finite loss at step " + std::to_string(step) +
                             (last_checkpoint.empty()
                                  ? std::string("; no checkpoint written yet")
                                  : "; last good checkpoint: " + last_checkpoint));
      }
      tape.backward(loss);

      std::vector<Tensor> grads;
      grads.reserve(names.size());
      live.for_each([&](const std::string&, Tensor& t) { grads.push_back(tape.grad(t)); });

      if (tcfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads) {
          for (double v : g.data()) sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm > tcfg.clip_norm) {
          const double f = tcfg.clip_norm / norm;
          for (auto& g : grads) g = scale(g, f);
        }
      }
      adam_step(params, grads, names, adam, tcfg);

      result.history.push_back(LossRecord{step, epoch, loss_value, snr_db});
      if (tcfg.log_every > 0 && step % tcfg.log_every == 0) {
        std::cerr << "step " << step << " epoch " << epoch << " loss " << loss_value << "\n";
      }
      ++step;
      if (!tcfg.checkpoint_path.empty() && tcfg.checkpoint_every_steps > 0 &&
          step % tcfg.checkpoint_every_steps == 0) {
        save_checkpoint(tcfg.checkpoint_path, mcfg, params);
        last_checkpoint = tcfg.checkpoint_path;
      }
      if (tcfg.max_steps > 0 && step >= tcfg.max_steps) done = true;
    }
  }
  if (!tcfg.checkpoint_path.empty()) {
    save_checkpoint(tcfg.checkpoint_path, mcfg, params);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace semcom

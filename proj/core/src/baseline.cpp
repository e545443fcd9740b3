#include "semcom/baseline.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

BaselineChain::BaselineChain(HuffmanCodebook codebook, TurboConfig turbo_cfg)
    : codebook_(std::move(codebook)), turbo_(turbo_cfg) {}

BaselineChain BaselineChain::build(const std::vector<std::vector<std::string>>& train_sentences,
                                   TurboConfig turbo_cfg) {
  return BaselineChain(HuffmanCodebook::build(train_sentences), turbo_cfg);
}

std::vector<std::string> BaselineChain::send_sentence(const std::vector<std::string>& tokens,
                                                      ChannelKind kind, double snr_db,
                                                      Rng& rng) const {
  BitVec bits = codebook_.encode(tokens);
  const auto& eos = codebook_.eos_bits();
  bits.insert(bits.end(), eos.begin(), eos.end());

  const auto coded = turbo_.encode(bits);
  const auto tx = qpsk_modulate(coded);  // coded length 3K+4 per block is even

  // Wrap the constellation in a frame so the shared channel simulator and its
  // block-fading convention (one gain per sentence) apply unchanged.
  SymbolFrame layout;
  layout.seq_len = static_cast<int>(tx.size());
  layout.reals_per_token = 2;
  layout.token_mask.assign(tx.size(), 1);
  layout.reals = Tensor::zeros({1, static_cast<int>(tx.size()) * 2});
  SymbolFrame frame = frame_from_complex(layout, tx);

  const ChannelRealization real = draw_realization(kind, snr_db, 1, rng);
  const SymbolFrame received = equalize(transmit(frame, real, rng), real);

  // Perfect CSI: after y/h the effective noise variance is sigma^2/|h|^2.
  double eff_var = real.noise_variance();
  if (kind == ChannelKind::kRayleighBlock) {
    const double h2 = std::norm(real.gains[0]);
    eff_var = eff_var / h2;
  }
  const auto llrs = qpsk_demodulate_soft(frame_to_complex(received), eff_var);
  const auto decoded_bits = turbo_.decode(llrs);
  return codebook_.decode(decoded_bits);
}

std::vector<std::vector<std::string>> BaselineChain::run(
    const std::vector<std::vector<std::string>>& sentences, ChannelKind kind, double snr_db,
    Rng& rng) const {
  std::vector<std::vector<std::string>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    out.push_back(send_sentence(s, kind, snr_db, rng));
  }
  return out;
}

}  // namespace semcom

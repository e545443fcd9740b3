#pragma once

#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/huffman.hpp"
#include "semcom/modem.hpp"
#include "semcom/turbo.hpp"

namespace semcom {

// Classical separate source/channel chain: word-level Huffman source coding,
// rate-1/3 turbo channel coding, Gray QPSK over the simulated channel with
// perfect-CSI equalization and soft demodulation.
class BaselineChain {
 public:
  BaselineChain(HuffmanCodebook codebook, TurboConfig turbo_cfg);

  static BaselineChain build(const std::vector<std::vector<std::string>>& train_sentences,
                             TurboConfig turbo_cfg = {});

  // Sends one tokenized sentence and returns whatever decodes on the far
  // side; bit errors may garble the suffix.
  std::vector<std::string> send_sentence(const std::vector<std::string>& tokens,
                                         ChannelKind kind, double snr_db, Rng& rng) const;

  std::vector<std::vector<std::string>> run(
      const std::vector<std::vector<std::string>>& sentences, ChannelKind kind,
      double snr_db, Rng& rng) const;

  const HuffmanCodebook& codebook() const { return codebook_; }
  const TurboCodec& turbo() const { return turbo_; }

 private:
  HuffmanCodebook codebook_;
  TurboCodec turbo_;
};

}  // namespace semcom

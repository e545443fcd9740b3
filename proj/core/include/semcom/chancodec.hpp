#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "semcom/model_config.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

// One batch of power-normalized channel symbols. Real and imaginary parts
// are interleaved along the last tensor axis (even index = real part).
struct SymbolFrame {
  Tensor reals;                          // [B x (seq_len * reals_per_token)]
  int seq_len = 0;                       // tokens per sentence (padded length)
  int reals_per_token = 0;               // 2 * complex symbols per token
  std::vector<std::uint8_t> token_mask;  // B*seq_len, true at real tokens

  int batch() const { return reals.defined() ? reals.dim(0) : 0; }
  int symbols_per_token() const { return reals_per_token / 2; }
  int reals_per_sentence() const { return seq_len * reals_per_token; }
};

struct ChannelEncoderParams {
  Tensor w1, b1;  // model_dim -> chan_hidden (ReLU)
  Tensor w2, b2;  // chan_hidden -> symbol_reals
};

struct ChannelDecoderParams {
  Tensor w1, b1;  // symbol_reals -> chan_dec_h1 (ReLU)
  Tensor w2, b2;  // chan_dec_h1 -> chan_dec_h2 (ReLU)
  Tensor w3, b3;  // chan_dec_h2 -> model_dim
};

// Maps semantic features [B x L x d] to complex symbols, normalizing the
// batch so non-padding symbols have unit average power. Normalization is a
// tape-recorded operation, so gradients flow through it. Throws
// NumericalError when the pre-normalization frame carries (near-)zero power.
SymbolFrame channel_encode(const Tensor& features,
                           const std::vector<std::uint8_t>& token_mask,
                           const ChannelEncoderParams& params, const ModelConfig& cfg);

// Inverse mapping back to semantic feature space [B x L x d].
Tensor channel_decode(const SymbolFrame& frame, const ChannelDecoderParams& params,
                      const ModelConfig& cfg);

// Mean |x|^2 over non-padding complex symbols.
double mean_symbol_power(const SymbolFrame& frame);

// Value-level views used by the channel simulator.
std::vector<std::complex<double>> frame_to_complex(const SymbolFrame& frame);
SymbolFrame frame_from_complex(const SymbolFrame& layout,
                               const std::vector<std::complex<double>>& symbols);

}  // namespace semcom

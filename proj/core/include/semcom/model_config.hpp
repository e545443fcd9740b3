#pragma once

#include <array>
#include <string>

namespace semcom {

// Dimensions of the full codec. Defaults follow the reference network
// settings: 3 dual-attention layers with 8 heads on each side, a 256/16
// dense transmitter and a 128/512/128 dense receiver.
struct ModelConfig {
  int vocab_size = 0;
  int model_dim = 128;
  int ffn_dim = 512;
  int num_heads = 8;
  int encoder_layers = 3;
  int decoder_layers = 3;
  std::array<int, 3> kernel_sizes{3, 5, 7};
  int bottleneck_ratio = 8;
  int max_positions = 160;

  int chan_hidden = 256;   // transmitter hidden width
  int symbol_reals = 16;   // reals per token on the wire (2 per complex symbol)
  int chan_dec_h1 = 128;   // receiver hidden widths
  int chan_dec_h2 = 512;

  int head_dim() const { return model_dim / num_heads; }
  int symbols_per_token() const { return symbol_reals / 2; }

  void validate() const;
};

}  // namespace semcom

#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "semcom/chancodec.hpp"
#include "semcom/corpus.hpp"
#include "semcom/model_config.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

// ---- parameters ------------------------------------------------------------

struct HeadParams {
  Tensor wq, wk, wv;  // each [d x head_dim]
};

struct SpatialAttentionParams {
  std::vector<HeadParams> heads;
  Tensor out_w;  // [d x d]
  Tensor ln_gain, ln_bias;
};

// The channel-wise branch: three parallel conv banks of increasing kernel
// size, a 1x1 merge back to d channels, a squeeze-style gate over a
// max-pooled descriptor, and a 1x1 post conv before the residual norm.
struct ChannelAttentionParams {
  std::array<Tensor, 3> conv_w;  // [d x d x k_i]
  std::array<Tensor, 3> conv_b;  // [d]
  Tensor merge_w, merge_b;       // [d x 3d x 1], [d]
  Tensor squeeze_w;              // [d x d/r]
  Tensor excite_w;               // [d/r x d]
  Tensor post_w, post_b;         // [d x d x 1], [d]
  Tensor ln_gain, ln_bias;
};

struct FeedForwardParams {
  Tensor w1, b1;  // d -> ffn_dim
  Tensor w2, b2;  // ffn_dim -> d
};

struct CrossAttentionParams {
  std::vector<HeadParams> heads;
  Tensor out_w;
  Tensor ln_gain, ln_bias;
};

struct EncoderLayerParams {
  SpatialAttentionParams spatial;
  ChannelAttentionParams channel;
  FeedForwardParams ffn;
};

struct DecoderLayerParams {
  SpatialAttentionParams self_attn;
  ChannelAttentionParams channel;
  CrossAttentionParams cross;
  FeedForwardParams ffn;
};

struct ModelParams {
  Tensor embedding;  // [V x d]
  std::vector<EncoderLayerParams> encoder;
  std::vector<DecoderLayerParams> decoder;
  Tensor out_w, out_b;  // prediction layer [d x V], [V]
  ChannelEncoderParams chan_enc;
  ChannelDecoderParams chan_dec;

  // Visits every tensor with a stable name; the order defines optimizer
  // state and checkpoint layout.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  // Copy whose tensors are all watched by `tape`.
  ModelParams tracked(Tape& tape) const;
};

ModelParams init_params(const ModelConfig& cfg, Rng& rng);

// ---- forward pieces ----------------------------------------------------------

// Additive attention bias: 0 where attention is allowed, -1e30 where the key
// is padding (and, when causal, where key > query).
Tensor attention_bias(const std::vector<std::uint8_t>& key_mask, int batch, int len_q,
                      int len_k, bool causal);

// Sinusoidal position table [L x d].
Tensor positional_encoding(int length, int dim);

// Test instrumentation for the fusion block and the decoder input path.
struct ForwardHooks {
  // Evaluate (and add) the channel branch before the spatial branch.
  bool channel_branch_first = false;
  // Observes the exact tensors handed to the two branches of each layer.
  std::function<void(const Tensor& spatial_in, const Tensor& channel_in)> fuse_inputs;
  // Collects post-softmax attention weights [B x Lq x Lk], one per head call.
  std::vector<Tensor>* attention_weights = nullptr;
  // Applied to the decoder input right after embedding + positions; lets
  // tests attach a tracked perturbation for causality checks.
  std::function<Tensor(const Tensor&)> transform_decoder_input;
};

Tensor spatial_attention(const Tensor& z, const SpatialAttentionParams& p,
                         const Tensor& attn_bias, const ModelConfig& cfg,
                         const ForwardHooks* hooks = nullptr);

// pad_mask (B*L, may be empty for "no padding") zeroes padded positions
// before the convolution banks so padding cannot leak into real tokens.
// `causal` switches the convolutions to left-only padding and the gate's
// max-pool to a running prefix max, so position t never reads beyond t.
Tensor channel_attention(const Tensor& z, const ChannelAttentionParams& p,
                         const std::vector<std::uint8_t>& pad_mask, bool causal,
                         const ModelConfig& cfg);

Tensor fuse_layer(const Tensor& z, const EncoderLayerParams& p, const Tensor& attn_bias,
                  const std::vector<std::uint8_t>& pad_mask, const ModelConfig& cfg,
                  const ForwardHooks* hooks = nullptr);

// Token batch -> semantic features [B x L x d].
Tensor encode(const corpus::TokenBatch& batch, const ModelParams& params,
              const ModelConfig& cfg, const ForwardHooks* hooks = nullptr);

// Teacher-forced decoder pass over a full target prefix matrix
// [B x Lt] -> vocabulary logits [B x Lt x V].
Tensor decode_forward(const Tensor& memory, const std::vector<std::uint8_t>& memory_mask,
                      const IdMatrix& decoder_ids,
                      const std::vector<std::uint8_t>& decoder_mask,
                      const ModelParams& params, const ModelConfig& cfg,
                      const ForwardHooks* hooks = nullptr);

// Next-token logits [B x V] for partial sequences that start with START.
Tensor decode_step(const Tensor& memory, const std::vector<std::uint8_t>& memory_mask,
                   const IdMatrix& partial_tokens, const ModelParams& params,
                   const ModelConfig& cfg);

// Greedy decoding for a single sentence (memory [1 x Ls x d]); returns the
// decoded ids without framing, stopping at END or max_len.
std::vector<int> greedy_decode(const Tensor& memory, const std::vector<std::uint8_t>& memory_mask,
                               const ModelParams& params, const ModelConfig& cfg, int max_len);

}  // namespace semcom

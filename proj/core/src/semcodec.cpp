#include "semcom/semcodec.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

namespace {

constexpr double kMaskBias = -1e30;

Tensor tracked_copy(Tape& tape, const Tensor& t) { return tape.watch(t); }

// [B x L x d] constant multiplier that zeroes padded positions.
Tensor pad_zero_mask(const std::vector<std::uint8_t>& pad_mask, int B, int L, int d) {
  std::vector<double> v(static_cast<std::size_t>(B) * L * d, 0.0);
  for (int b = 0; b < B; ++b) {
    for (int l = 0; l < L; ++l) {
      if (!pad_mask[static_cast<std::size_t>(b) * L + l]) continue;
      const std::size_t base = (static_cast<std::size_t>(b) * L + l) * static_cast<std::size_t>(d);
      for (int i = 0; i < d; ++i) v[base + i] = 1.0;
    }
  }
  return Tensor::from_data({B, L, d}, std::move(v));
}

// [B x d x L] additive bias pushing padded columns to -1e30 before pooling.
Tensor pool_pad_bias(const std::vector<std::uint8_t>& pad_mask, int B, int d, int L) {
  std::vector<double> v(static_cast<std::size_t>(B) * d * L, 0.0);
  for (int b = 0; b < B; ++b) {
    for (int l = 0; l < L; ++l) {
      if (pad_mask[static_cast<std::size_t>(b) * L + l]) continue;
      for (int c = 0; c < d; ++c) {
        v[(static_cast<std::size_t>(b) * d + c) * L + l] = kMaskBias;
      }
    }
  }
  return Tensor::from_data({B, d, L}, std::move(v));
}

Tensor feed_forward(const Tensor& x, const FeedForwardParams& p) {
  // Position-wise MLP with a residual connection.
  return add(x, dense(relu(dense(x, p.w1, p.b1)), p.w2, p.b2));
}

Tensor multi_head_attention(const Tensor& queries_in, const Tensor& keys_in,
                            const std::vector<HeadParams>& heads, const Tensor& out_w,
                            const Tensor& attn_bias, const ModelConfig& cfg,
                            const ForwardHooks* hooks) {
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  std::vector<Tensor> contexts;
  contexts.reserve(heads.size());
  for (const auto& h : heads) {
    Tensor q = dense(queries_in, h.wq);  // [B x Lq x dh]
    Tensor k = dense(keys_in, h.wk);     // [B x Lk x dh]
    Tensor v = dense(keys_in, h.wv);
    Tensor scores = add(scale(matmul(q, transpose(k)), inv_sqrt_dh), attn_bias);
    Tensor weights = softmax(scores, 2);
    if (hooks != nullptr && hooks->attention_weights != nullptr) {
      hooks->attention_weights->push_back(weights);
    }
    contexts.push_back(matmul(weights, v));
  }
  return dense(concat(contexts, 2), out_w);
}

}  // namespace

// ---- parameter plumbing ------------------------------------------------------

namespace {

template <typename Fn, typename SAP>
void visit_spatial(const std::string& prefix, SAP& p, Fn&& fn) {
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    fn(hp + ".wq", p.heads[h].wq);
    fn(hp + ".wk", p.heads[h].wk);
    fn(hp + ".wv", p.heads[h].wv);
  }
  fn(prefix + ".out_w", p.out_w);
  fn(prefix + ".ln_g", p.ln_gain);
  fn(prefix + ".ln_b", p.ln_bias);
}

template <typename Fn, typename CAP>
void visit_channel(const std::string& prefix, CAP& p, Fn&& fn) {
  for (int i = 0; i < 3; ++i) {
    fn(prefix + ".conv" + std::to_string(i) + ".w", p.conv_w[static_cast<std::size_t>(i)]);
    fn(prefix + ".conv" + std::to_string(i) + ".b", p.conv_b[static_cast<std::size_t>(i)]);
  }
  fn(prefix + ".merge.w", p.merge_w);
  fn(prefix + ".merge.b", p.merge_b);
  fn(prefix + ".squeeze_w", p.squeeze_w);
  fn(prefix + ".excite_w", p.excite_w);
  fn(prefix + ".post.w", p.post_w);
  fn(prefix + ".post.b", p.post_b);
  fn(prefix + ".ln_g", p.ln_gain);
  fn(prefix + ".ln_b", p.ln_bias);
}

template <typename Fn, typename FFP>
void visit_ffn(const std::string& prefix, FFP& p, Fn&& fn) {
  fn(prefix + ".w1", p.w1);
  fn(prefix + ".b1", p.b1);
  fn(prefix + ".w2", p.w2);
  fn(prefix + ".b2", p.b2);
}

template <typename Fn, typename MP>
void visit_params(MP& params, Fn&& fn) {
  fn("embedding", params.embedding);
  for (std::size_t i = 0; i < params.encoder.size(); ++i) {
    const std::string p = "enc." + std::to_string(i);
    visit_spatial(p + ".sa", params.encoder[i].spatial, fn);
    visit_channel(p + ".ca", params.encoder[i].channel, fn);
    visit_ffn(p + ".ffn", params.encoder[i].ffn, fn);
  }
  for (std::size_t i = 0; i < params.decoder.size(); ++i) {
    const std::string p = "dec." + std::to_string(i);
    visit_spatial(p + ".sa", params.decoder[i].self_attn, fn);
    visit_channel(p + ".ca", params.decoder[i].channel, fn);
    visit_spatial(p + ".cross", params.decoder[i].cross, fn);
    visit_ffn(p + ".ffn", params.decoder[i].ffn, fn);
  }
  fn("out.w", params.out_w);
  fn("out.b", params.out_b);
  fn("chanenc.w1", params.chan_enc.w1);
  fn("chanenc.b1", params.chan_enc.b1);
  fn("chanenc.w2", params.chan_enc.w2);
  fn("chanenc.b2", params.chan_enc.b2);
  fn("chandec.w1", params.chan_dec.w1);
  fn("chandec.b1", params.chan_dec.b1);
  fn("chandec.w2", params.chan_dec.w2);
  fn("chandec.b2", params.chan_dec.b2);
  fn("chandec.w3", params.chan_dec.w3);
  fn("chandec.b3", params.chan_dec.b3);
}

}  // namespace

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_params(*this, fn);
}

void ModelParams::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  visit_params(*this, fn);
}

ModelParams ModelParams::tracked(Tape& tape) const {
  ModelParams copy = *this;
  copy.for_each([&tape](const std::string&, Tensor& t) { t = tracked_copy(tape, t); });
  return copy;
}

void ModelConfig::validate() const {
  if (vocab_size < 5) throw ConfigError("model config: vocabulary must have at least 5 entries");
  if (model_dim < 1 || num_heads < 1 || model_dim % num_heads != 0) {
    throw ConfigError("model config: head count must divide the model width");
  }
  if (bottleneck_ratio < 1 || model_dim % bottleneck_ratio != 0) {
    throw ConfigError("model config: bottleneck ratio must divide the model width");
  }
  for (std::size_t i = 0; i < kernel_sizes.size(); ++i) {
    if (kernel_sizes[i] < 1 || kernel_sizes[i] % 2 == 0) {
      throw ConfigError("model config: kernel sizes must be odd and positive");
    }
    if (i > 0 && kernel_sizes[i] <= kernel_sizes[i - 1]) {
      throw ConfigError("model config: kernel sizes must be ascending");
    }
  }
  if (encoder_layers < 1 || decoder_layers < 1) {
    throw ConfigError("model config: need at least one layer on each side");
  }
  if (symbol_reals < 2 || symbol_reals % 2 != 0) {
    throw ConfigError("model config: symbol_reals must be even and >= 2");
  }
  if (ffn_dim < 1 || chan_hidden < 1 || chan_dec_h1 < 1 || chan_dec_h2 < 1) {
    throw ConfigError("model config: layer widths must be positive");
  }
  if (max_positions < 3) throw ConfigError("model config: max_positions too small");
}

namespace {

SpatialAttentionParams init_spatial(const ModelConfig& cfg, Rng& rng) {
  SpatialAttentionParams p;
  const int d = cfg.model_dim, dh = cfg.head_dim();
  p.heads.resize(static_cast<std::size_t>(cfg.num_heads));
  for (auto& h : p.heads) {
    h.wq = Tensor::xavier({d, dh}, rng);
    h.wk = Tensor::xavier({d, dh}, rng);
    h.wv = Tensor::xavier({d, dh}, rng);
  }
  p.out_w = Tensor::xavier({d, d}, rng);
  p.ln_gain = Tensor::full({d}, 1.0);
  p.ln_bias = Tensor::zeros({d});
  return p;
}

ChannelAttentionParams init_channel(const ModelConfig& cfg, Rng& rng) {
  ChannelAttentionParams p;
  const int d = cfg.model_dim, r = cfg.bottleneck_ratio;
  for (int i = 0; i < 3; ++i) {
    p.conv_w[static_cast<std::size_t>(i)] =
        Tensor::xavier({d, d, cfg.kernel_sizes[static_cast<std::size_t>(i)]}, rng);
    p.conv_b[static_cast<std::size_t>(i)] = Tensor::zeros({d});
  }
  p.merge_w = Tensor::xavier({d, 3 * d, 1}, rng);
  p.merge_b = Tensor::zeros({d});
  p.squeeze_w = Tensor::xavier({d, d / r}, rng);
  p.excite_w = Tensor::xavier({d / r, d}, rng);
  p.post_w = Tensor::xavier({d, d, 1}, rng);
  p.post_b = Tensor::zeros({d});
  p.ln_gain = Tensor::full({d}, 1.0);
  p.ln_bias = Tensor::zeros({d});
  return p;
}

FeedForwardParams init_ffn(const ModelConfig& cfg, Rng& rng) {
  FeedForwardParams p;
  p.w1 = Tensor::xavier({cfg.model_dim, cfg.ffn_dim}, rng);
  p.b1 = Tensor::zeros({cfg.ffn_dim});
  p.w2 = Tensor::xavier({cfg.ffn_dim, cfg.model_dim}, rng);
  p.b2 = Tensor::zeros({cfg.model_dim});
  return p;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  const int d = cfg.model_dim;
  p.embedding = Tensor::randn({cfg.vocab_size, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  p.encoder.resize(static_cast<std::size_t>(cfg.encoder_layers));
  for (auto& layer : p.encoder) {
    layer.spatial = init_spatial(cfg, rng);
    layer.channel = init_channel(cfg, rng);
    layer.ffn = init_ffn(cfg, rng);
  }
  p.decoder.resize(static_cast<std::size_t>(cfg.decoder_layers));
  for (auto& layer : p.decoder) {
    layer.self_attn = init_spatial(cfg, rng);
    layer.channel = init_channel(cfg, rng);
    CrossAttentionParams cross;
    auto sp = init_spatial(cfg, rng);
    cross.heads = std::move(sp.heads);
    cross.out_w = sp.out_w;
    cross.ln_gain = sp.ln_gain;
    cross.ln_bias = sp.ln_bias;
    layer.cross = std::move(cross);
    layer.ffn = init_ffn(cfg, rng);
  }
  p.out_w = Tensor::xavier({d, cfg.vocab_size}, rng);
  p.out_b = Tensor::zeros({cfg.vocab_size});
  p.chan_enc.w1 = Tensor::xavier({d, cfg.chan_hidden}, rng);
  p.chan_enc.b1 = Tensor::zeros({cfg.chan_hidden});
  p.chan_enc.w2 = Tensor::xavier({cfg.chan_hidden, cfg.symbol_reals}, rng);
  p.chan_enc.b2 = Tensor::zeros({cfg.symbol_reals});
  p.chan_dec.w1 = Tensor::xavier({cfg.symbol_reals, cfg.chan_dec_h1}, rng);
  p.chan_dec.b1 = Tensor::zeros({cfg.chan_dec_h1});
  p.chan_dec.w2 = Tensor::xavier({cfg.chan_dec_h1, cfg.chan_dec_h2}, rng);
  p.chan_dec.b2 = Tensor::zeros({cfg.chan_dec_h2});
  p.chan_dec.w3 = Tensor::xavier({cfg.chan_dec_h2, d}, rng);
  p.chan_dec.b3 = Tensor::zeros({d});
  return p;
}

// ---- forward ------------------------------------------------------------------

Tensor attention_bias(const std::vector<std::uint8_t>& key_mask, int batch, int len_q,
                      int len_k, bool causal) {
  if (key_mask.size() != static_cast<std::size_t>(batch) * len_k) {
    throw DimensionError("attention_bias: key mask has " + std::to_string(key_mask.size()) +
                         " entries, expected " + std::to_string(batch * len_k));
  }
  std::vector<double> v(static_cast<std::size_t>(batch) * len_q * len_k, 0.0);
  for (int b = 0; b < batch; ++b) {
    for (int q = 0; q < len_q; ++q) {
      const std::size_t base = (static_cast<std::size_t>(b) * len_q + q) * len_k;
      for (int k = 0; k < len_k; ++k) {
        const bool masked = !key_mask[static_cast<std::size_t>(b) * len_k + k] || (causal && k > q);
        if (masked) v[base + k] = kMaskBias;
      }
    }
  }
  return Tensor::from_data({batch, len_q, len_k}, std::move(v));
}

Tensor positional_encoding(int length, int dim) {
  std::vector<double> v(static_cast<std::size_t>(length) * dim);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / dim;
      const double angle = pos / std::pow(10000.0, exponent);
      v[static_cast<std::size_t>(pos) * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from_data({length, dim}, std::move(v));
}

Tensor spatial_attention(const Tensor& z, const SpatialAttentionParams& p,
                         const Tensor& attn_bias, const ModelConfig& cfg,
                         const ForwardHooks* hooks) {
  if (z.rank() != 3) {
    throw DimensionError("spatial_attention: expected [B x L x d], got " + shape_str(z.shape()));
  }
  if (attn_bias.rank() != 3 || attn_bias.dim(0) != z.dim(0) || attn_bias.dim(1) != z.dim(1) ||
      attn_bias.dim(2) != z.dim(1)) {
    throw DimensionError("spatial_attention: bias " + shape_str(attn_bias.shape()) +
                         " does not fit input " + shape_str(z.shape()));
  }
  Tensor proj = multi_head_attention(z, z, p.heads, p.out_w, attn_bias, cfg, hooks);
  return layer_norm(add(proj, z), p.ln_gain, p.ln_bias);
}

Tensor channel_attention(const Tensor& z, const ChannelAttentionParams& p,
                         const std::vector<std::uint8_t>& pad_mask, bool causal,
                         const ModelConfig& cfg) {
  if (z.rank() != 3) {
    throw DimensionError("channel_attention: expected [B x L x d], got " + shape_str(z.shape()));
  }
  const int B = z.dim(0), L = z.dim(1), d = z.dim(2);
  const bool has_pad = !pad_mask.empty();
  if (has_pad && pad_mask.size() != static_cast<std::size_t>(B) * L) {
    throw DimensionError("channel_attention: pad mask size mismatch");
  }

  Tensor zin = has_pad ? mul(z, pad_zero_mask(pad_mask, B, L, d)) : z;
  Tensor zt = transpose(zin);  // [B x d x L]

  const PadMode pad_mode = causal ? PadMode::kCausalLeft : PadMode::kSame;
  std::vector<Tensor> banks;
  banks.reserve(3);
  for (int i = 0; i < 3; ++i) {
    banks.push_back(conv1d(zt, p.conv_w[static_cast<std::size_t>(i)],
                           p.conv_b[static_cast<std::size_t>(i)], pad_mode));
  }
  Tensor merged = conv1d(sigmoid(concat(banks, 1)), p.merge_w, p.merge_b, PadMode::kSame);

  // Squeeze-style gate over the pooled descriptor. Padded columns are pushed
  // to -1e30 so they never win the max; in causal mode the pool is a running
  // prefix max so position t only sees positions <= t.
  Tensor pool_in = has_pad ? add(merged, pool_pad_bias(pad_mask, B, d, L)) : merged;
  Tensor gated;
  if (causal) {
    Tensor prefix = transpose(cummax_last(pool_in));                       // [B x L x d]
    Tensor gate = sigmoid(dense(dense(prefix, p.squeeze_w), p.excite_w));  // [B x L x d]
    gated = mul(merged, transpose(gate));
  } else {
    Tensor pooled = global_maxpool(pool_in);                               // [B x d]
    Tensor gate = sigmoid(dense(dense(pooled, p.squeeze_w), p.excite_w));  // [B x d]
    gated = scale_channels(merged, gate);
  }

  Tensor post = conv1d(gated, p.post_w, p.post_b, PadMode::kSame);
  return layer_norm(add(transpose(post), z), p.ln_gain, p.ln_bias);
}

Tensor fuse_layer(const Tensor& z, const EncoderLayerParams& p, const Tensor& attn_bias,
                  const std::vector<std::uint8_t>& pad_mask, const ModelConfig& cfg,
                  const ForwardHooks* hooks) {
  // Both branches read the same pre-layer activation (parallel, not serial).
  if (hooks != nullptr && hooks->fuse_inputs) hooks->fuse_inputs(z, z);
  Tensor fused;
  if (hooks != nullptr && hooks->channel_branch_first) {
    Tensor ca = channel_attention(z, p.channel, pad_mask, false, cfg);
    Tensor sa = spatial_attention(z, p.spatial, attn_bias, cfg, hooks);
    fused = add(ca, sa);
  } else {
    Tensor sa = spatial_attention(z, p.spatial, attn_bias, cfg, hooks);
    Tensor ca = channel_attention(z, p.channel, pad_mask, false, cfg);
    fused = add(sa, ca);
  }
  return feed_forward(fused, p.ffn);
}

namespace {

Tensor embed_with_positions(const IdMatrix& ids, const Tensor& embedding, int model_dim,
                            int max_positions) {
  if (ids.cols > max_positions) {
    throw DataError("sequence length " + std::to_string(ids.cols) +
                    " exceeds the position table (" + std::to_string(max_positions) + ")");
  }
  Tensor emb = embedding_lookup(embedding, ids);  // [B x L x d]
  Tensor pe = positional_encoding(ids.cols, model_dim);
  std::vector<double> tiled(static_cast<std::size_t>(ids.rows) * ids.cols * model_dim);
  const auto& pv = pe.data();
  for (int b = 0; b < ids.rows; ++b) {
    std::copy(pv.begin(), pv.end(),
              tiled.begin() + static_cast<std::size_t>(b) * pv.size());
  }
  return add(emb, Tensor::from_data({ids.rows, ids.cols, model_dim}, std::move(tiled)));
}

}  // namespace

Tensor encode(const corpus::TokenBatch& batch, const ModelParams& params,
              const ModelConfig& cfg, const ForwardHooks* hooks) {
  Tensor z = embed_with_positions(batch.ids, params.embedding, cfg.model_dim,
                                  cfg.max_positions);
  Tensor bias = attention_bias(batch.pad_mask, batch.batch(), batch.max_len(),
                               batch.max_len(), false);
  for (const auto& layer : params.encoder) {
    z = fuse_layer(z, layer, bias, batch.pad_mask, cfg, hooks);
  }
  return z;
}

Tensor decode_forward(const Tensor& memory, const std::vector<std::uint8_t>& memory_mask,
                      const IdMatrix& decoder_ids,
                      const std::vector<std::uint8_t>& decoder_mask,
                      const ModelParams& params, const ModelConfig& cfg,
                      const ForwardHooks* hooks) {
  if (memory.rank() != 3) {
    throw DimensionError("decode_forward: memory must be [B x Ls x d], got " +
                         shape_str(memory.shape()));
  }
  const int B = memory.dim(0), Ls = memory.dim(1);
  if (decoder_ids.rows != B) {
    throw DimensionError("decode_forward: decoder batch " + std::to_string(decoder_ids.rows) +
                         " vs memory batch " + std::to_string(B));
  }
  const int Lt = decoder_ids.cols;
  Tensor z = embed_with_positions(decoder_ids, params.embedding, cfg.model_dim,
                                  cfg.max_positions);
  if (hooks != nullptr && hooks->transform_decoder_input) {
    z = hooks->transform_decoder_input(z);
  }
  Tensor self_bias = attention_bias(decoder_mask, B, Lt, Lt, true);
  Tensor cross_bias = attention_bias(memory_mask, B, Lt, Ls, false);
  for (const auto& layer : params.decoder) {
    if (hooks != nullptr && hooks->fuse_inputs) hooks->fuse_inputs(z, z);
    Tensor sa = spatial_attention(z, layer.self_attn, self_bias, cfg, hooks);
    Tensor ca = channel_attention(z, layer.channel, decoder_mask, true, cfg);
    Tensor s = add(sa, ca);
    Tensor proj = multi_head_attention(s, memory, layer.cross.heads, layer.cross.out_w,
                                       cross_bias, cfg, hooks);
    Tensor c = layer_norm(add(proj, s), layer.cross.ln_gain, layer.cross.ln_bias);
    z = feed_forward(c, layer.ffn);
  }
  return dense(z, params.out_w, params.out_b);  // [B x Lt x V]
}

Tensor decode_step(const Tensor& memory, const std::vector<std::uint8_t>& memory_mask,
                   const IdMatrix& partial_tokens, const ModelParams& params,
                   const ModelConfig& cfg) {
  if (partial_tokens.cols < 1) {
    throw ContractError("decode_step: partial sequence is empty");
  }
  for (int b = 0; b < partial_tokens.rows; ++b) {
    if (partial_tokens.at(b, 0) != corpus::Vocabulary::kStart) {
      throw ContractError("decode_step: partial sequence must begin with START");
    }
  }
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(partial_tokens.rows) * partial_tokens.cols, 1);
  Tensor logits = decode_forward(memory, memory_mask, partial_tokens, mask, params, cfg);
  const int B = logits.dim(0), Lt = logits.dim(1), V = logits.dim(2);
  const auto& lv = logits.data();
  std::vector<double> last(static_cast<std::size_t>(B) * V);
  for (int b = 0; b < B; ++b) {
    const std::size_t src = (static_cast<std::size_t>(b) * Lt + (Lt - 1)) * V;
    std::copy(lv.begin() + static_cast<std::ptrdiff_t>(src),
              lv.begin() + static_cast<std::ptrdiff_t>(src + V),
              last.begin() + static_cast<std::size_t>(b) * V);
  }
  return Tensor::from_data({B, V}, std::move(last));
}

std::vector<int> greedy_decode(const Tensor& memory, const std::vector<std::uint8_t>& memory_mask,
                               const ModelParams& params, const ModelConfig& cfg, int max_len) {
  if (memory.dim(0) != 1) {
    throw ContractError("greedy_decode: expects a single-sentence memory");
  }
  IdMatrix partial;
  partial.rows = 1;
  partial.cols = 1;
  partial.ids = {corpus::Vocabulary::kStart};
  std::vector<int> out;
  for (int step = 0; step < max_len; ++step) {
    Tensor logits = decode_step(memory, memory_mask, partial, params, cfg);
    const auto& lv = logits.data();
    int best = 0;
    for (int v = 1; v < logits.dim(1); ++v) {
      if (lv[static_cast<std::size_t>(v)] > lv[static_cast<std::size_t>(best)]) best = v;
    }
    if (best == corpus::Vocabulary::kEnd) break;
    out.push_back(best);
    partial.ids.push_back(best);
    partial.cols += 1;
    if (partial.cols >= cfg.max_positions) break;
  }
  return out;
}

}  // namespace semcom

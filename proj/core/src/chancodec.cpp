#include "semcom/chancodec.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

SymbolFrame channel_encode(const Tensor& features,
                           const std::vector<std::uint8_t>& token_mask,
                           const ChannelEncoderParams& params, const ModelConfig& cfg) {
  if (features.rank() != 3 || features.dim(2) != cfg.model_dim) {
    throw DimensionError("channel_encode: features " + shape_str(features.shape()) +
                         " do not match model width " + std::to_string(cfg.model_dim));
  }
  const int B = features.dim(0), L = features.dim(1), R = cfg.symbol_reals;
  if (token_mask.size() != static_cast<std::size_t>(B) * L) {
    throw DimensionError("channel_encode: token mask size mismatch");
  }

  Tensor hidden = relu(dense(features, params.w1, params.b1));
  Tensor raw = dense(hidden, params.w2, params.b2);        // [B x L x R]
  Tensor flat = reshape(raw, {B, L * R});

  // Zero the padding slots and normalize over the remaining symbols so each
  // transmitted complex symbol has unit average power.
  std::vector<double> maskv(static_cast<std::size_t>(B) * L * R, 0.0);
  std::int64_t real_tokens = 0;
  for (int b = 0; b < B; ++b) {
    for (int l = 0; l < L; ++l) {
      if (!token_mask[static_cast<std::size_t>(b) * L + l]) continue;
      ++real_tokens;
      const std::size_t base = (static_cast<std::size_t>(b) * L + l) * R;
      for (int r = 0; r < R; ++r) maskv[base + r] = 1.0;
    }
  }
  if (real_tokens == 0) throw ContractError("channel_encode: batch has no real tokens");
  Tensor masked = mul(flat, Tensor::from_data({B, L * R}, std::move(maskv)));

  const double n_complex = static_cast<double>(real_tokens) * (R / 2);
  Tensor power = scale(sum_all(mul(masked, masked)), 1.0 / n_complex);
  if (power.value() < 1e-24) {
    throw NumericalError("channel_encode: zero-power frame; refusing to normalize");
  }
  Tensor factor = rsqrt(power);

  SymbolFrame frame;
  frame.reals = scale_scalar(masked, factor);
  frame.seq_len = L;
  frame.reals_per_token = R;
  frame.token_mask = token_mask;
  return frame;
}

Tensor channel_decode(const SymbolFrame& frame, const ChannelDecoderParams& params,
                      const ModelConfig& cfg) {
  if (!frame.reals.defined() || frame.reals.rank() != 2) {
    throw FramingError("channel_decode: malformed frame tensor");
  }
  const int B = frame.reals.dim(0);
  if (frame.reals.dim(1) != frame.seq_len * frame.reals_per_token ||
      frame.reals_per_token != cfg.symbol_reals) {
    throw FramingError("channel_decode: frame layout " + std::to_string(frame.seq_len) + "x" +
                       std::to_string(frame.reals_per_token) + " does not match tensor " +
                       shape_str(frame.reals.shape()));
  }
  Tensor x = reshape(frame.reals, {B, frame.seq_len, frame.reals_per_token});
  Tensor h1 = relu(dense(x, params.w1, params.b1));
  Tensor h2 = relu(dense(h1, params.w2, params.b2));
  return dense(h2, params.w3, params.b3);  // [B x L x d]
}

double mean_symbol_power(const SymbolFrame& frame) {
  const auto& v = frame.reals.data();
  const int B = frame.reals.dim(0), L = frame.seq_len, R = frame.reals_per_token;
  double acc = 0.0;
  std::int64_t n_complex = 0;
  for (int b = 0; b < B; ++b) {
    for (int l = 0; l < L; ++l) {
      if (!frame.token_mask[static_cast<std::size_t>(b) * L + l]) continue;
      const std::size_t base = (static_cast<std::size_t>(b) * L + l) * R;
      for (int r = 0; r < R; ++r) acc += v[base + r] * v[base + r];
      n_complex += R / 2;
    }
  }
  if (n_complex == 0) throw ContractError("mean_symbol_power: no real tokens");
  return acc / static_cast<double>(n_complex);
}

std::vector<std::complex<double>> frame_to_complex(const SymbolFrame& frame) {
  const auto& v = frame.reals.data();
  std::vector<std::complex<double>> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::complex<double>(v[2 * i], v[2 * i + 1]);
  }
  return out;
}

SymbolFrame frame_from_complex(const SymbolFrame& layout,
                               const std::vector<std::complex<double>>& symbols) {
  if (symbols.size() * 2 != static_cast<std::size_t>(layout.reals.size())) {
    throw FramingError("frame_from_complex: symbol count does not match layout");
  }
  std::vector<double> v(symbols.size() * 2);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    v[2 * i] = symbols[i].real();
    v[2 * i + 1] = symbols[i].imag();
  }
  SymbolFrame out = layout;
  out.reals = Tensor::from_data(layout.reals.shape(), std::move(v));
  return out;
}

}  // namespace semcom

#include "semcom/channel.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

std::string to_string(ChannelKind kind) {
  return kind == ChannelKind::kAwgn ? "awgn" : "rayleigh";
}

ChannelKind channel_kind_from_string(const std::string& name) {
  if (name == "awgn") return ChannelKind::kAwgn;
  if (name == "rayleigh" || name == "rayleigh_block") return ChannelKind::kRayleighBlock;
  throw ConfigError("unknown channel kind: " + name);
}

double ChannelRealization::noise_variance() const {
  if (noiseless()) return 0.0;
  return std::pow(10.0, -snr_db / 10.0);
}

bool ChannelRealization::noiseless() const { return std::isinf(snr_db) && snr_db > 0.0; }

ChannelRealization draw_realization(ChannelKind kind, double snr_db, int batch, Rng& rng) {
  if (batch < 1) throw ContractError("draw_realization: batch must be >= 1");
  ChannelRealization real;
  real.kind = kind;
  real.snr_db = snr_db;
  real.gains.assign(static_cast<std::size_t>(batch), {1.0, 0.0});
  if (kind == ChannelKind::kRayleighBlock) {
    const double s = std::sqrt(0.5);
    for (auto& h : real.gains) {
      do {
        h = {rng.normal() * s, rng.normal() * s};
      } while (std::abs(h) == 0.0);
    }
  }
  return real;
}

SymbolFrame transmit(const SymbolFrame& x, const ChannelRealization& real, Rng& rng) {
  const int B = x.batch();
  if (static_cast<int>(real.gains.size()) != B) {
    throw ContractError("transmit: realization drawn for a different batch size");
  }
  const int n = x.reals_per_sentence() / 2;  // complex symbols per sentence
  auto symbols = frame_to_complex(x);
  const double sigma = std::sqrt(real.noise_variance() / 2.0);
  for (int b = 0; b < B; ++b) {
    const auto h = real.gains[static_cast<std::size_t>(b)];
    for (int i = 0; i < n; ++i) {
      auto& s = symbols[static_cast<std::size_t>(b) * n + i];
      s *= h;
      if (!real.noiseless()) {
        s += std::complex<double>(rng.normal() * sigma, rng.normal() * sigma);
      }
    }
  }
  return frame_from_complex(x, symbols);
}

SymbolFrame equalize(const SymbolFrame& y, const ChannelRealization& real) {
  if (real.kind == ChannelKind::kAwgn) return y;
  const int B = y.batch();
  if (static_cast<int>(real.gains.size()) != B) {
    throw ContractError("equalize: realization drawn for a different batch size");
  }
  const int n = y.reals_per_sentence() / 2;
  auto symbols = frame_to_complex(y);
  for (int b = 0; b < B; ++b) {
    const auto h = real.gains[static_cast<std::size_t>(b)];
    if (std::abs(h) < 1e-12) {
      throw NumericalError("equalize: degenerate channel gain |h| < 1e-12");
    }
    for (int i = 0; i < n; ++i) {
      symbols[static_cast<std::size_t>(b) * n + i] /= h;
    }
  }
  return frame_from_complex(y, symbols);
}

SymbolFrame apply_channel(const SymbolFrame& x, const ChannelRealization& real, Rng& rng) {
  // Detach the input for the value-level simulation, then reattach via the
  // straight-through op so the tape sees an identity Jacobian.
  SymbolFrame detached = x;
  detached.reals = Tensor::from_data(x.reals.shape(), x.reals.data());
  SymbolFrame equalized = equalize(transmit(detached, real, rng), real);
  SymbolFrame out = x;
  out.reals = straight_through(x.reals, equalized.reals);
  return out;
}

}  // namespace semcom

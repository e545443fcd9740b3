#pragma once

#include <complex>
#include <string>
#include <vector>

#include "semcom/chancodec.hpp"
#include "semcom/rng.hpp"

namespace semcom {

enum class ChannelKind { kAwgn, kRayleighBlock };

std::string to_string(ChannelKind kind);
ChannelKind channel_kind_from_string(const std::string& name);

// One draw of the channel for a batch: a per-sentence complex gain (1 for
// AWGN) and the configured SNR. snr_db = +infinity disables noise entirely.
struct ChannelRealization {
  ChannelKind kind = ChannelKind::kAwgn;
  double snr_db = 0.0;
  std::vector<std::complex<double>> gains;  // one per sentence

  // Complex noise variance for unit signal power: 10^(-snr_db/10).
  double noise_variance() const;
  bool noiseless() const;
};

// Rayleigh gains are CN(0,1) per sentence (block fading, one gain per
// sentence); an exact-zero draw is rejected and redrawn.
ChannelRealization draw_realization(ChannelKind kind, double snr_db, int batch, Rng& rng);

// y = h*x + n, n ~ CN(0, sigma^2 I). Value-level: the result is untracked.
SymbolFrame transmit(const SymbolFrame& x, const ChannelRealization& real, Rng& rng);

// Zero-forcing with perfect CSI: y/h per sentence (AWGN passes through).
// Throws NumericalError when |h| < 1e-12.
SymbolFrame equalize(const SymbolFrame& y, const ChannelRealization& real);

// Training-mode wrapper: forward applies transmit + equalize; backward
// treats noise as constant, i.e. the identity Jacobian of y/h = x + n/h.
SymbolFrame apply_channel(const SymbolFrame& x, const ChannelRealization& real, Rng& rng);

}  // namespace semcom

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace semcom {

// Gray-mapped QPSK at unit average power: bit pair (b0, b1) maps to
// ((1-2*b0) + j(1-2*b1)) / sqrt(2); b0 rides the real rail.
std::vector<std::complex<double>> qpsk_modulate(const std::vector<std::uint8_t>& bits);

// Exact per-bit LLRs log(P(b=0)/P(b=1)) for AWGN with complex noise variance
// `noise_var`: 2*sqrt(2)*Re(y)/sigma^2 and the same for Im(y).
std::vector<double> qpsk_demodulate_soft(const std::vector<std::complex<double>>& symbols,
                                         double noise_var);

}  // namespace semcom

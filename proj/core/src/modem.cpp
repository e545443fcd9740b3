#include "semcom/modem.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

std::vector<std::complex<double>> qpsk_modulate(const std::vector<std::uint8_t>& bits) {
  if (bits.size() % 2 != 0) {
    throw ContractError("qpsk_modulate: bit count must be even");
  }
  const double a = 1.0 / std::sqrt(2.0);
  std::vector<std::complex<double>> out(bits.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {bits[2 * i] ? -a : a, bits[2 * i + 1] ? -a : a};
  }
  return out;
}

std::vector<double> qpsk_demodulate_soft(const std::vector<std::complex<double>>& symbols,
                                         double noise_var) {
  // A vanishing noise variance would produce infinities; clamp so that
  // noiseless runs yield huge-but-finite LLRs with the right signs.
  const double sigma2 = noise_var > 1e-12 ? noise_var : 1e-12;
  const double factor = 2.0 * std::sqrt(2.0) / sigma2;
  std::vector<double> llrs(symbols.size() * 2);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    llrs[2 * i] = factor * symbols[i].real();
    llrs[2 * i + 1] = factor * symbols[i].imag();
  }
  return llrs;
}

}  // namespace semcom

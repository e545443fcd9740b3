#pragma once

#include <cstdint>
#include <vector>

namespace semcom {

// Rate-1/3 parallel-concatenated convolutional code: two RSC (7,5) octal
// encoders (constraint length 3) joined by a seeded random interleaver,
// decoded with iterative log-MAP (BCJR) exchange of extrinsic information.
struct TurboConfig {
  int block_length = 1024;  // information bits per block
  int iterations = 5;
  std::uint64_t interleaver_seed = 0x7ea1;
};

class TurboCodec {
 public:
  explicit TurboCodec(TurboConfig cfg);

  // Exactly block_length info bits -> 3*K + 4 coded bits
  // ([sys | parity1 | parity2 | termination of encoder 1]).
  std::vector<std::uint8_t> encode_block(const std::vector<std::uint8_t>& info) const;

  // LLRs are log(P(bit=0)/P(bit=1)), one per coded bit.
  std::vector<std::uint8_t> decode_block(const std::vector<double>& llrs) const;

  // Stream interface: zero-pads to whole blocks.
  std::vector<std::uint8_t> encode(const std::vector<std::uint8_t>& bits) const;
  std::vector<std::uint8_t> decode(const std::vector<double>& llrs) const;

  int info_block_bits() const { return cfg_.block_length; }
  int coded_block_bits() const { return 3 * cfg_.block_length + 4; }
  const std::vector<int>& interleaver() const { return interleaver_; }
  const TurboConfig& config() const { return cfg_; }

 private:
  TurboConfig cfg_;
  std::vector<int> interleaver_;
};

}  // namespace semcom

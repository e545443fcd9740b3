#include "semcom/turbo.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "semcom/error.hpp"
#include "semcom/rng.hpp"

namespace semcom {

namespace {

// RSC (7,5): feedback 1+D+D^2, feedforward 1+D^2. State = (r1<<1)|r2.
constexpr int kStates = 4;

inline int rsc_feedback(int state) { return ((state >> 1) ^ state) & 1; }

inline int rsc_input_bit(int state, int u) { return u ^ rsc_feedback(state); }

inline int rsc_parity(int state, int u) {
  const int a = rsc_input_bit(state, u);
  return a ^ (state & 1);
}

inline int rsc_next(int state, int u) {
  const int a = rsc_input_bit(state, u);
  return (a << 1) | (state >> 1);
}

constexpr double kNegInf = -1e30;

inline double maxstar(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b <= kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

// Log-MAP BCJR over one RSC trellis. lu/lp: per-step LLRs (log P0/P1) for
// the systematic and parity streams, with any a priori already folded into
// lu. Returns per-step posterior LLRs.
std::vector<double> bcjr(const std::vector<double>& lu, const std::vector<double>& lp,
                         bool terminated) {
  const int n = static_cast<int>(lu.size());
  auto gamma = [&](int step, int state, int u) {
    const double au = u == 0 ? 1.0 : -1.0;
    const double ap = rsc_parity(state, u) == 0 ? 1.0 : -1.0;
    return 0.5 * (au * lu[static_cast<std::size_t>(step)] +
                  ap * lp[static_cast<std::size_t>(step)]);
  };

  std::vector<std::array<double, kStates>> alpha(static_cast<std::size_t>(n) + 1);
  alpha[0] = {0.0, kNegInf, kNegInf, kNegInf};
  for (int k = 0; k < n; ++k) {
    auto& next = alpha[static_cast<std::size_t>(k) + 1];
    next = {kNegInf, kNegInf, kNegInf, kNegInf};
    for (int s = 0; s < kStates; ++s) {
      const double as = alpha[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)];
      if (as <= kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        const int ns = rsc_next(s, u);
        next[static_cast<std::size_t>(ns)] =
            maxstar(next[static_cast<std::size_t>(ns)], as + gamma(k, s, u));
      }
    }
    const double mx = *std::max_element(next.begin(), next.end());
    for (auto& v : next) v -= mx;
  }

  std::vector<std::array<double, kStates>> beta(static_cast<std::size_t>(n) + 1);
  if (terminated) {
    beta[static_cast<std::size_t>(n)] = {0.0, kNegInf, kNegInf, kNegInf};
  } else {
    beta[static_cast<std::size_t>(n)] = {0.0, 0.0, 0.0, 0.0};
  }
  for (int k = n - 1; k >= 0; --k) {
    auto& cur = beta[static_cast<std::size_t>(k)];
    cur = {kNegInf, kNegInf, kNegInf, kNegInf};
    for (int s = 0; s < kStates; ++s) {
      for (int u = 0; u < 2; ++u) {
        const double bn =
            beta[static_cast<std::size_t>(k) + 1][static_cast<std::size_t>(rsc_next(s, u))];
        if (bn <= kNegInf) continue;
        cur[static_cast<std::size_t>(s)] =
            maxstar(cur[static_cast<std::size_t>(s)], bn + gamma(k, s, u));
      }
    }
    const double mx = *std::max_element(cur.begin(), cur.end());
    for (auto& v : cur) v -= mx;
  }

  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    double num = kNegInf, den = kNegInf;
    for (int s = 0; s < kStates; ++s) {
      const double as = alpha[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)];
      if (as <= kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        const double metric =
            as + gamma(k, s, u) +
            beta[static_cast<std::size_t>(k) + 1][static_cast<std::size_t>(rsc_next(s, u))];
        if (u == 0) {
          num = maxstar(num, metric);
        } else {
          den = maxstar(den, metric);
        }
      }
    }
    out[static_cast<std::size_t>(k)] = num - den;
  }
  return out;
}

}  // namespace

TurboCodec::TurboCodec(TurboConfig cfg) : cfg_(cfg) {
  if (cfg_.block_length < 8) throw ConfigError("turbo: block length must be >= 8");
  if (cfg_.iterations < 1) throw ConfigError("turbo: need at least one iteration");
  interleaver_.resize(static_cast<std::size_t>(cfg_.block_length));
  for (int i = 0; i < cfg_.block_length; ++i) interleaver_[static_cast<std::size_t>(i)] = i;
  Rng rng(cfg_.interleaver_seed);
  rng.shuffle(interleaver_);
}

std::vector<std::uint8_t> TurboCodec::encode_block(const std::vector<std::uint8_t>& info) const {
  const int K = cfg_.block_length;
  if (static_cast<int>(info.size()) != K) {
    throw FramingError("turbo: block carries " + std::to_string(info.size()) +
                       " bits, expected " + std::to_string(K));
  }
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(coded_block_bits()));
  out.insert(out.end(), info.begin(), info.end());

  int state = 0;
  std::vector<std::uint8_t> par1(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    par1[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(rsc_parity(state, info[static_cast<std::size_t>(k)]));
    state = rsc_next(state, info[static_cast<std::size_t>(k)]);
  }
  // Terminate encoder 1: two steps with u = feedback drive the state to 0.
  std::uint8_t tail_sys[2], tail_par[2];
  for (int t = 0; t < 2; ++t) {
    const int u = rsc_feedback(state);
    tail_sys[t] = static_cast<std::uint8_t>(u);
    tail_par[t] = static_cast<std::uint8_t>(rsc_parity(state, u));
    state = rsc_next(state, u);
  }

  state = 0;
  std::vector<std::uint8_t> par2(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const std::uint8_t u = info[static_cast<std::size_t>(interleaver_[static_cast<std::size_t>(k)])];
    par2[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(rsc_parity(state, u));
    state = rsc_next(state, u);
  }

  out.insert(out.end(), par1.begin(), par1.end());
  out.insert(out.end(), par2.begin(), par2.end());
  out.push_back(tail_sys[0]);
  out.push_back(tail_par[0]);
  out.push_back(tail_sys[1]);
  out.push_back(tail_par[1]);
  return out;
}

std::vector<std::uint8_t> TurboCodec::decode_block(const std::vector<double>& llrs) const {
  const int K = cfg_.block_length;
  if (static_cast<int>(llrs.size()) != coded_block_bits()) {
    throw FramingError("turbo: got " + std::to_string(llrs.size()) + " LLRs, expected " +
                       std::to_string(coded_block_bits()));
  }
  const double* lsys = llrs.data();
  const double* lpar1 = llrs.data() + K;
  const double* lpar2 = llrs.data() + 2 * K;
  const double tail_sys[2] = {llrs[static_cast<std::size_t>(3 * K)],
                              llrs[static_cast<std::size_t>(3 * K + 2)]};
  const double tail_par[2] = {llrs[static_cast<std::size_t>(3 * K + 1)],
                              llrs[static_cast<std::size_t>(3 * K + 3)]};

  std::vector<double> apriori1(static_cast<std::size_t>(K), 0.0);
  std::vector<double> lu1(static_cast<std::size_t>(K) + 2), lp1(static_cast<std::size_t>(K) + 2);
  std::vector<double> lu2(static_cast<std::size_t>(K)), lp2(static_cast<std::size_t>(K));
  std::vector<double> ext1(static_cast<std::size_t>(K));
  std::vector<double> post2;

  for (int it = 0; it < cfg_.iterations; ++it) {
    for (int k = 0; k < K; ++k) {
      lu1[static_cast<std::size_t>(k)] = lsys[k] + apriori1[static_cast<std::size_t>(k)];
      lp1[static_cast<std::size_t>(k)] = lpar1[k];
    }
    lu1[static_cast<std::size_t>(K)] = tail_sys[0];
    lu1[static_cast<std::size_t>(K) + 1] = tail_sys[1];
    lp1[static_cast<std::size_t>(K)] = tail_par[0];
    lp1[static_cast<std::size_t>(K) + 1] = tail_par[1];
    const auto post1 = bcjr(lu1, lp1, true);
    for (int k = 0; k < K; ++k) {
      ext1[static_cast<std::size_t>(k)] =
          post1[static_cast<std::size_t>(k)] - lsys[k] - apriori1[static_cast<std::size_t>(k)];
    }

    for (int k = 0; k < K; ++k) {
      const int src = interleaver_[static_cast<std::size_t>(k)];
      lu2[static_cast<std::size_t>(k)] = lsys[src] + ext1[static_cast<std::size_t>(src)];
      lp2[static_cast<std::size_t>(k)] = lpar2[k];
    }
    post2 = bcjr(lu2, lp2, false);
    for (int k = 0; k < K; ++k) {
      const int src = interleaver_[static_cast<std::size_t>(k)];
      apriori1[static_cast<std::size_t>(src)] =
          post2[static_cast<std::size_t>(k)] - lu2[static_cast<std::size_t>(k)];
    }
  }

  std::vector<std::uint8_t> bits(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const int src = interleaver_[static_cast<std::size_t>(k)];
    bits[static_cast<std::size_t>(src)] = post2[static_cast<std::size_t>(k)] >= 0.0 ? 0 : 1;
  }
  return bits;
}

std::vector<std::uint8_t> TurboCodec::encode(const std::vector<std::uint8_t>& bits) const {
  const int K = cfg_.block_length;
  const std::size_t blocks = (bits.size() + static_cast<std::size_t>(K) - 1) /
                             static_cast<std::size_t>(K);
  std::vector<std::uint8_t> out;
  out.reserve(blocks * static_cast<std::size_t>(coded_block_bits()));
  for (std::size_t b = 0; b < std::max<std::size_t>(blocks, 1); ++b) {
    std::vector<std::uint8_t> block(static_cast<std::size_t>(K), 0);
    for (int k = 0; k < K; ++k) {
      const std::size_t idx = b * static_cast<std::size_t>(K) + static_cast<std::size_t>(k);
      if (idx < bits.size()) block[static_cast<std::size_t>(k)] = bits[idx];
    }
    const auto coded = encode_block(block);
    out.insert(out.end(), coded.begin(), coded.end());
  }
  return out;
}

std::vector<std::uint8_t> TurboCodec::decode(const std::vector<double>& llrs) const {
  const auto cbb = static_cast<std::size_t>(coded_block_bits());
  if (llrs.empty() || llrs.size() % cbb != 0) {
    throw FramingError("turbo: LLR stream of " + std::to_string(llrs.size()) +
                       " does not divide into blocks of " + std::to_string(cbb));
  }
  std::vector<std::uint8_t> out;
  out.reserve((llrs.size() / cbb) * static_cast<std::size_t>(cfg_.block_length));
  for (std::size_t b = 0; b < llrs.size() / cbb; ++b) {
    std::vector<double> block(llrs.begin() + static_cast<std::ptrdiff_t>(b * cbb),
                              llrs.begin() + static_cast<std::ptrdiff_t>((b + 1) * cbb));
    const auto bits = decode_block(block);
    out.insert(out.end(), bits.begin(), bits.end());
  }
  return out;
}

}  // namespace semcom

#ifndef WAVELEARN_DETECTOR_HPP
#define WAVELEARN_DETECTOR_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wavelearn/autodiff.hpp"
#include "wavelearn/rng.hpp"

// Residual 1-D convolutional detector: maps a length-N received block
// (re/im as 2 channels) to an N x K grid of LLRs. Separable (depthwise +
// pointwise) dilated convolutions, zero-padded to preserve length.
// LLR sign convention here: positive means bit 1 is more likely, i.e.
// Q(B=1|r) = sigmoid(LLR). The classic AWGN demapper ratio is oriented the
// other way; negate to convert.

namespace wavelearn {

struct DetectorConfig {
  int channels = 64;                           // F
  int blocks = 5;                              // B
  int kernel_size = 3;
  std::vector<int> dilations = {1, 2, 4, 8, 16};
};

inline int receptive_field(const DetectorConfig& cfg) {
  int span = 0;
  for (int i = 0; i < cfg.blocks; ++i) {
    span += (cfg.kernel_size - 1) * cfg.dilations[static_cast<std::size_t>(i)];
  }
  return span + 1;
}

inline void validate(const DetectorConfig& cfg) {
  if (cfg.channels < 1 || cfg.blocks < 0 || cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0) {
    throw std::invalid_argument("DetectorConfig: bad channels/blocks/kernel");
  }
  if (cfg.dilations.size() != static_cast<std::size_t>(cfg.blocks)) {
    throw std::invalid_argument("DetectorConfig: one dilation per block required");
  }
  for (int d : cfg.dilations) {
    if (d < 1) throw std::invalid_argument("DetectorConfig: dilations must be >= 1");
  }
}

// Named parameter tensors in a fixed order: input pointwise, per-block
// depthwise + pointwise, output pointwise. Kernels get Kaiming-uniform
// fan-in scaling, biases start at zero.
inline std::vector<std::pair<std::string, ad::Tensor>> init_detector_params(
    const DetectorConfig& cfg, int bits_per_symbol, CounterRng& rng) {
  validate(cfg);
  const std::size_t f = static_cast<std::size_t>(cfg.channels);
  const std::size_t k = static_cast<std::size_t>(cfg.kernel_size);
  const std::size_t kb = static_cast<std::size_t>(bits_per_symbol);
  const auto kaiming = [&rng](ad::Shape shape, std::size_t fan_in) {
    ad::Tensor t = ad::Tensor::zeros(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.v) v = bound * (2.0 * rng.uniform() - 1.0);
    return t;
  };
  std::vector<std::pair<std::string, ad::Tensor>> params;
  params.emplace_back("det.in.w", kaiming({f, 2}, 2));
  params.emplace_back("det.in.b", ad::Tensor::zeros({f}));
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string p = "det.block" + std::to_string(b);
    params.emplace_back(p + ".dw", kaiming({f, k}, k));
    params.emplace_back(p + ".db", ad::Tensor::zeros({f}));
    params.emplace_back(p + ".pw", kaiming({f, f}, f));
    params.emplace_back(p + ".pb", ad::Tensor::zeros({f}));
  }
  params.emplace_back("det.out.w", kaiming({kb, f}, f));
  params.emplace_back("det.out.b", ad::Tensor::zeros({kb}));
  return params;
}

struct DetectorVars {
  ad::Var in_w, in_b;
  struct Block {
    ad::Var dw, db, pw, pb;
  };
  std::vector<Block> blocks;
  ad::Var out_w, out_b;
};

// Forward pass (B, N, 2) -> (B, N, K). Requires N >= receptive field.
inline ad::Var detect(ad::Var input, const DetectorVars& v, const DetectorConfig& cfg) {
  const ad::Shape& s = input.val().shape;
  if (s.size() != 3 || s[2] != 2) throw std::invalid_argument("detect: input must be (B,N,2)");
  if (s[1] < static_cast<std::size_t>(receptive_field(cfg))) {
    throw std::invalid_argument("detect: block length below the receptive field minimum");
  }
  ad::Var x = ad::pointwise_conv(input, v.in_w, v.in_b);
  for (int b = 0; b < cfg.blocks; ++b) {
    const auto& blk = v.blocks[static_cast<std::size_t>(b)];
    ad::Var h = ad::relu(x);
    h = ad::depthwise_conv(h, blk.dw, blk.db,
                           static_cast<std::size_t>(cfg.dilations[static_cast<std::size_t>(b)]));
    h = ad::pointwise_conv(h, blk.pw, blk.pb);
    x = ad::add(x, h);
  }
  return ad::pointwise_conv(x, v.out_w, v.out_b);
}

// Total binary cross-entropy in bits per channel use:
//   L = -(1/(M N)) sum_{i,m,k} log2 Q(B | r),  Q(B=1) = sigmoid(LLR).
// The rate estimate is K - L.
inline ad::Var bce_loss(ad::Var llrs, const std::vector<std::uint8_t>& bits) {
  const ad::Shape& s = llrs.val().shape;
  if (s.size() != 3) throw std::invalid_argument("bce_loss: llrs must be (B,N,K)");
  if (bits.size() != llrs.val().size()) throw std::invalid_argument("bce_loss: bits size mismatch");
  ad::Tape& t = *llrs.tape;
  ad::Tensor sign(s, t.take_raw(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw std::invalid_argument("bce_loss: bits must be 0/1");
    sign.v[i] = bits[i] ? 1.0 : -1.0;
  }
  ad::Var mask = t.constant(std::move(sign));
  ad::Var matched = ad::mul(llrs, mask);
  ad::Var ls = ad::log_sigmoid(matched);
  const double denom = static_cast<double>(s[0] * s[1]) * std::log(2.0);
  return ad::scale(ad::sum(ls), -1.0 / denom);
}

}  // namespace wavelearn

#endif  // WAVELEARN_DETECTOR_HPP

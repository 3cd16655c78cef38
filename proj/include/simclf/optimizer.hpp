#pragma once

#include <cstdint>

#include "simclf/encoder.hpp"

namespace simclf {

struct AdamConfig {
  double learning_rate = 1e-5;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  explicit AdamState(const EncoderParams& params);

  std::uint64_t step = 0;
  EncoderGradients first_moment;
  EncoderGradients second_moment;
};

// Bias-corrected Adam with decoupled weight decay:
//   p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)
// The PAD embedding row is never touched. Throws TrainingError naming the
// tensor if a gradient entry is not finite.
void adam_step(EncoderParams& params, const EncoderGradients& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace simclf

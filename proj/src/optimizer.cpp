#include "simclf/optimizer.hpp"

#include <cmath>
#include <string>

#include "simclf/errors.hpp"

namespace simclf {

AdamState::AdamState(const EncoderParams& params)
    : first_moment(EncoderGradients::zeros_like(params)),
      second_moment(EncoderGradients::zeros_like(params)) {}

void adam_step(EncoderParams& params, const EncoderGradients& grads, AdamState& state,
               const AdamConfig& config) {
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();

  for (std::size_t t = 0; t < p.size(); ++t) {
    const auto& gt = *g[t].tensor;
    if (gt.rows() != p[t].tensor->rows() || gt.cols() != p[t].tensor->cols() ||
        m[t].tensor->rows() != gt.rows() || m[t].tensor->cols() != gt.cols()) {
      throw InputError(std::string("gradient shape mismatch for ") + std::string(p[t].name));
    }
    if (gt.size() != 0 && !gt.allFinite()) {
      throw TrainingError(std::string("non-finite gradient in ") + std::string(p[t].name));
    }
  }

  ++state.step;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, step);
  const double correction2 = 1.0 - std::pow(config.beta2, step);
  const double decay = config.learning_rate * config.weight_decay;

  for (std::size_t t = 0; t < p.size(); ++t) {
    auto& param = *p[t].tensor;
    const auto& grad = *g[t].tensor;
    auto& m1 = *m[t].tensor;
    auto& m2 = *v[t].tensor;
    const bool is_embedding = t == 0;
    for (Eigen::Index r = 0; r < param.rows(); ++r) {
      if (is_embedding && r == kPadId) continue;
      for (Eigen::Index c = 0; c < param.cols(); ++c) {
        const double gi = grad(r, c);
        m1(r, c) = config.beta1 * m1(r, c) + (1.0 - config.beta1) * gi;
        m2(r, c) = config.beta2 * m2(r, c) + (1.0 - config.beta2) * gi * gi;
        const double m_hat = m1(r, c) / correction1;
        const double v_hat = m2(r, c) / correction2;
        param(r, c) -= decay * param(r, c) +
                       config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
      }
    }
  }
}

}  // namespace simclf

#include "tta/adam.hpp"

#include <cmath>
#include <string>

namespace tta {

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ArgumentError("adam_step: size mismatch (params " +
                        std::to_string(params.size()) + ", grads " +
                        std::to_string(grads.size()) + ", state " +
                        std::to_string(state.m.size()) + ")");
  if (!all_finite(grads)) throw NumericError("adam_step: non-finite gradient");

  const AdamConfig& c = state.config;
  state.t += 1;
  const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / m_corr;
    const double v_hat = state.v[i] / v_corr;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace tta

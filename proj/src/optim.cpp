#include "lapgsr/optim.hpp"

#include <cmath>

#include "lapgsr/error.hpp"

namespace lapgsr {

AdamState make_adam_state(std::span<const Tensor> params) {
  AdamState state;
  for (const Tensor& p : params) {
    state.m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    state.v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state, const AdamOptions& options) {
  if (params.size() != state.m.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but state has " +
                     std::to_string(state.m.size()));
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(options.beta1), state.t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(options.beta2), state.t);
  const auto step = static_cast<float>(options.lr / bc1);
  const auto inv_bc2 = static_cast<float>(1.0 / bc2);
  const float b1 = options.beta1, b2 = options.beta2;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = params[p];
    if (static_cast<int64_t>(state.m[p].size()) != param.numel()) {
      throw ShapeError("adam_step: moment buffer size mismatch for parameter " + std::to_string(p));
    }
    if (!param.has_grad()) {
      // Zero gradient: moments decay, and the update is zero when they are.
      for (std::size_t i = 0; i < state.m[p].size(); ++i) {
        state.m[p][i] *= b1;
        state.v[p][i] *= b2;
      }
    }
    auto data = param.data();
    const auto grad = param.grad();
    float* m = state.m[p].data();
    float* v = state.v[p].data();
    const auto count = static_cast<int64_t>(data.size());
    if (param.has_grad()) {
      for (int64_t i = 0; i < count; ++i) {
        const float g = grad[i];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      }
    }
    for (int64_t i = 0; i < count; ++i) {
      data[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + options.eps);
    }
  }
}

Tensor kaiming_normal(const Shape& weight_shape, Rng& rng, float slope) {
  const double fan_in = static_cast<double>(weight_shape.c * weight_shape.h * weight_shape.w);
  if (fan_in <= 0) throw ShapeError("kaiming_normal: zero fan-in for " + weight_shape.str());
  const double std_dev = std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in));
  Tensor w(weight_shape);
  for (float& v : w.data()) v = static_cast<float>(std_dev * rng.normal());
  return w;
}

}  // namespace lapgsr

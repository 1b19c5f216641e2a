#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lapgsr/rng.hpp"
#include "lapgsr/tensor.hpp"

namespace lapgsr {

struct AdamOptions {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// First/second moment buffers, one per parameter, plus the step count.
struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  int64_t t = 0;
};

AdamState make_adam_state(std::span<const Tensor> params);

/// One bias-corrected Adam update. A parameter without a gradient buffer is
/// treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamOptions& options);

/// He-normal draws with std = sqrt(2 / ((1 + slope^2) * fan_in)),
/// fan_in = inC * k * k.
Tensor kaiming_normal(const Shape& weight_shape, Rng& rng, float slope = 0.2f);

}  // namespace lapgsr

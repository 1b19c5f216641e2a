#pragma once

// Differentiable operations. Each op computes its output eagerly and, when
// the tape is recording and any input requires a gradient, appends the rule
// that maps the output gradient back onto its inputs.

#include <cstdint>

#include "lapgsr/tensor.hpp"

namespace lapgsr {

inline constexpr float kLeakySlope = 0.2f;
inline constexpr float kInstanceNormEps = 1e-5f;

/// Cross-correlation with a square kernel. weight is [outC, inC, k, k],
/// bias is [1, outC, 1, 1] or undefined.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int64_t stride, int64_t padding);

/// x for x >= 0, slope*x otherwise. The derivative at exactly 0 is 1.
Tensor leaky_relu(Tape& tape, const Tensor& x, float slope = kLeakySlope);
/// max(x, 0); derivative at 0 is 0.
Tensor relu(Tape& tape, const Tensor& x);
Tensor tanh_act(Tape& tape, const Tensor& x);
/// log(1 + exp(x)), evaluated stably.
Tensor softplus(Tape& tape, const Tensor& x);
Tensor square(Tape& tape, const Tensor& x);
/// scale * x + shift elementwise.
Tensor affine(Tape& tape, const Tensor& x, float scale, float shift);

/// Affine-free instance normalization over each (batch, channel) plane.
Tensor instance_norm(Tape& tape, const Tensor& x, float eps = kInstanceNormEps);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b);

enum class ResizeScale { kUp2, kDown2 };

/// Keys bicubic (a = -0.5) resampling by exactly 2 or 1/2 with half-pixel
/// alignment and replicate boundary. kDown2 requires even extents.
Tensor bicubic_resize(Tape& tape, const Tensor& x, ResizeScale scale);

/// Bicubic resampling to arbitrary extents; `antialias` stretches the kernel
/// when reducing. Used for data synthesis and baselines.
Tensor resize(Tape& tape, const Tensor& x, int64_t out_h, int64_t out_w, bool antialias);

/// Mean of squared differences over all elements, as a 1x1x1x1 tensor.
Tensor mse(Tape& tape, const Tensor& pred, const Tensor& target);
Tensor mean(Tape& tape, const Tensor& x);
Tensor sum(Tape& tape, const Tensor& x);

/// Throws NumericError naming `what` if any element is NaN or infinite.
void require_finite(const Tensor& x, const char* what);

}  // namespace lapgsr

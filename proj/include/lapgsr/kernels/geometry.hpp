#pragma once

#include <cstdint>
#include <vector>

namespace lapgsr::kernels {

/// Extents of a batched 2-D convolution with a square kernel and symmetric
/// zero padding.
struct ConvGeometry {
  int64_t batch = 1;
  int64_t in_c = 1;
  int64_t in_h = 1;
  int64_t in_w = 1;
  int64_t out_c = 1;
  int64_t kernel = 3;
  int64_t stride = 1;
  int64_t padding = 1;

  int64_t out_h() const { return (in_h + 2 * padding - kernel) / stride + 1; }
  int64_t out_w() const { return (in_w + 2 * padding - kernel) / stride + 1; }
  int64_t patch_size() const { return in_c * kernel * kernel; }
  int64_t weight_size() const { return out_c * patch_size(); }
  int64_t input_size() const { return batch * in_c * in_h * in_w; }
  int64_t output_size() const { return batch * out_c * out_h() * out_w(); }
};

/// Keys cubic convolution kernel, a = -0.5.
inline double keys_cubic(double x) {
  constexpr double a = -0.5;
  const double t = x < 0 ? -x : x;
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

/// Precomputed 1-D resampling weights: out[o] = sum_k weight[o*taps+k] *
/// in[index[o*taps+k]]. Indices are already clamped (replicate boundary).
struct ResampleTable {
  int64_t in_size = 0;
  int64_t out_size = 0;
  int64_t taps = 0;
  std::vector<int64_t> index;
  std::vector<float> weight;
};

/// Half-pixel-aligned Keys resampling from `in_size` to `out_size` samples.
/// With `antialias` and out_size < in_size the kernel is stretched by the
/// reduction factor and renormalized; otherwise the kernel is sampled at the
/// input spacing (4 taps).
ResampleTable make_resample_table(int64_t in_size, int64_t out_size, bool antialias);

}  // namespace lapgsr::kernels

#pragma once

// Serial, loop-for-loop reference kernels. They are templated on the scalar
// type so that test oracles can evaluate them in double precision, and they
// deliberately avoid the im2col/table machinery of the parallel kernels.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lapgsr/kernels/geometry.hpp"

namespace lapgsr::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y) {
  const int64_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t co = 0; co < g.out_c; ++co) {
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          T acc = b.empty() ? T(0) : b[co];
          for (int64_t ci = 0; ci < g.in_c; ++ci) {
            for (int64_t ky = 0; ky < k; ++ky) {
              const int64_t iy = oy * g.stride - g.padding + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int64_t kx = 0; kx < k; ++kx) {
                const int64_t ix = ox * g.stride - g.padding + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                acc += w[((co * g.in_c + ci) * k + ky) * k + kx] *
                       x[((n * g.in_c + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
          y[((n * g.out_c + co) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

/// Accumulates into dx, dw, db; an empty span skips that gradient.
template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                     std::span<const T> dy, std::span<T> dx, std::span<T> dw, std::span<T> db) {
  const int64_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t co = 0; co < g.out_c; ++co) {
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          const T grad = dy[((n * g.out_c + co) * oh + oy) * ow + ox];
          if (!db.empty()) db[co] += grad;
          for (int64_t ci = 0; ci < g.in_c; ++ci) {
            for (int64_t ky = 0; ky < k; ++ky) {
              const int64_t iy = oy * g.stride - g.padding + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int64_t kx = 0; kx < k; ++kx) {
                const int64_t ix = ox * g.stride - g.padding + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                const int64_t wi = ((co * g.in_c + ci) * k + ky) * k + kx;
                const int64_t xi = ((n * g.in_c + ci) * g.in_h + iy) * g.in_w + ix;
                if (!dw.empty()) dw[wi] += grad * x[xi];
                if (!dx.empty()) dx[xi] += grad * w[wi];
              }
            }
          }
        }
      }
    }
  }
}

namespace detail {
/// Taps of output sample `o` as (clamped index, weight) pairs.
template <typename T>
std::vector<std::pair<int64_t, T>> resample_taps(int64_t in_size, int64_t out_size, int64_t o,
                                                 bool antialias) {
  const double factor = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double center = (static_cast<double>(o) + 0.5) * factor - 0.5;
  const double stretch = (antialias && factor > 1.0) ? factor : 1.0;
  const double support = 2.0 * stretch;
  std::vector<std::pair<int64_t, T>> taps;
  double total = 0.0;
  for (auto i = static_cast<int64_t>(std::ceil(center - support));
       i <= static_cast<int64_t>(std::floor(center + support)); ++i) {
    const double wgt = keys_cubic((static_cast<double>(i) - center) / stretch);
    if (wgt == 0.0) continue;
    const int64_t clamped = i < 0 ? 0 : (i >= in_size ? in_size - 1 : i);
    taps.emplace_back(clamped, static_cast<T>(wgt));
    total += wgt;
  }
  if (stretch != 1.0) {
    for (auto& t : taps) t.second = static_cast<T>(static_cast<double>(t.second) / total);
  }
  return taps;
}
}  // namespace detail

/// Bicubic resize of `planes` independent HxW planes by direct 2-D summation.
template <typename T>
void resize_forward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                    bool antialias, std::span<const T> x, std::span<T> y) {
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const auto ty = detail::resample_taps<T>(in_h, out_h, oy, antialias);
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const auto tx = detail::resample_taps<T>(in_w, out_w, ox, antialias);
        T acc = 0;
        for (const auto& [iy, wy] : ty) {
          for (const auto& [ix, wx] : tx) acc += wy * wx * x[(p * in_h + iy) * in_w + ix];
        }
        y[(p * out_h + oy) * out_w + ox] = acc;
      }
    }
  }
}

/// Adjoint of resize_forward; accumulates into dx.
template <typename T>
void resize_backward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                     bool antialias, std::span<const T> dy, std::span<T> dx) {
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const auto ty = detail::resample_taps<T>(in_h, out_h, oy, antialias);
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const auto tx = detail::resample_taps<T>(in_w, out_w, ox, antialias);
        const T grad = dy[(p * out_h + oy) * out_w + ox];
        for (const auto& [iy, wy] : ty) {
          for (const auto& [ix, wx] : tx) dx[(p * in_h + iy) * in_w + ix] += wy * wx * grad;
        }
      }
    }
  }
}

/// Per-slice (x - mean) / sqrt(var + eps) with the biased variance.
template <typename T>
void instance_norm_forward(int64_t slices, int64_t plane, T eps, std::span<const T> x,
                           std::span<T> y) {
  for (int64_t s = 0; s < slices; ++s) {
    const T* xs = x.data() + s * plane;
    T mean = 0;
    for (int64_t i = 0; i < plane; ++i) mean += xs[i];
    mean /= static_cast<T>(plane);
    T var = 0;
    for (int64_t i = 0; i < plane; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<T>(plane);
    const T inv = T(1) / std::sqrt(var + eps);
    for (int64_t i = 0; i < plane; ++i) y[s * plane + i] = (xs[i] - mean) * inv;
  }
}

/// Accumulates d(loss)/dx given d(loss)/dy.
template <typename T>
void instance_norm_backward(int64_t slices, int64_t plane, T eps, std::span<const T> x,
                            std::span<const T> dy, std::span<T> dx) {
  std::vector<T> xhat(static_cast<std::size_t>(plane));
  for (int64_t s = 0; s < slices; ++s) {
    const T* xs = x.data() + s * plane;
    const T* gs = dy.data() + s * plane;
    T mean = 0;
    for (int64_t i = 0; i < plane; ++i) mean += xs[i];
    mean /= static_cast<T>(plane);
    T var = 0;
    for (int64_t i = 0; i < plane; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<T>(plane);
    const T inv = T(1) / std::sqrt(var + eps);
    T mean_g = 0, mean_gx = 0;
    for (int64_t i = 0; i < plane; ++i) {
      xhat[i] = (xs[i] - mean) * inv;
      mean_g += gs[i];
      mean_gx += gs[i] * xhat[i];
    }
    mean_g /= static_cast<T>(plane);
    mean_gx /= static_cast<T>(plane);
    for (int64_t i = 0; i < plane; ++i) {
      dx[s * plane + i] += inv * (gs[i] - mean_g - xhat[i] * mean_gx);
    }
  }
}

}  // namespace lapgsr::kernels::reference

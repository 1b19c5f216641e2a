#include <omp.h>

#include <atomic>
#include <cmath>

#include "lapgsr/kernels/kernels.hpp"
#include "lapgsr/kernels/reference.hpp"

namespace lapgsr::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::kParallel};
std::atomic<int> g_threads{0};
}  // namespace

void set_backend(Backend b) { g_backend = b; }
Backend backend() { return g_backend; }

void set_num_threads(int threads) {
  g_threads = threads;
  if (threads > 0) omp_set_num_threads(threads);
}

int num_threads() { return g_threads > 0 ? g_threads.load() : omp_get_max_threads(); }

ResampleTable make_resample_table(int64_t in_size, int64_t out_size, bool antialias) {
  ResampleTable t;
  t.in_size = in_size;
  t.out_size = out_size;
  const double factor = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double stretch = (antialias && factor > 1.0) ? factor : 1.0;
  const double support = 2.0 * stretch;
  t.taps = static_cast<int64_t>(std::ceil(2.0 * support)) + 1;
  t.index.assign(static_cast<std::size_t>(out_size * t.taps), 0);
  t.weight.assign(static_cast<std::size_t>(out_size * t.taps), 0.0f);
  for (int64_t o = 0; o < out_size; ++o) {
    const double center = (static_cast<double>(o) + 0.5) * factor - 0.5;
    const auto first = static_cast<int64_t>(std::ceil(center - support));
    double total = 0.0;
    std::vector<double> raw(static_cast<std::size_t>(t.taps), 0.0);
    for (int64_t k = 0; k < t.taps; ++k) {
      const int64_t i = first + k;
      raw[k] = keys_cubic((static_cast<double>(i) - center) / stretch);
      total += raw[k];
      t.index[o * t.taps + k] = i < 0 ? 0 : (i >= in_size ? in_size - 1 : i);
    }
    for (int64_t k = 0; k < t.taps; ++k) {
      const double wgt = stretch != 1.0 ? raw[k] / total : raw[k];
      t.weight[o * t.taps + k] = static_cast<float>(wgt);
    }
  }
  return t;
}

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
  if (backend() == Backend::kReference) return reference::conv2d_forward<float>(g, x, w, b, y);
  parallel::conv2d_forward(g, x, w, b, y);
}

void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db) {
  if (backend() == Backend::kReference) {
    return reference::conv2d_backward<float>(g, x, w, dy, dx, dw, db);
  }
  parallel::conv2d_backward(g, x, w, dy, dx, dw, db);
}

void resize_forward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                    bool antialias, std::span<const float> x, std::span<float> y) {
  if (backend() == Backend::kReference) {
    return reference::resize_forward<float>(planes, in_h, in_w, out_h, out_w, antialias, x, y);
  }
  parallel::resize_forward(planes, in_h, in_w, out_h, out_w, antialias, x, y);
}

void resize_backward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                     bool antialias, std::span<const float> dy, std::span<float> dx) {
  if (backend() == Backend::kReference) {
    return reference::resize_backward<float>(planes, in_h, in_w, out_h, out_w, antialias, dy, dx);
  }
  parallel::resize_backward(planes, in_h, in_w, out_h, out_w, antialias, dy, dx);
}

void instance_norm_forward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                           std::span<float> y) {
  if (backend() == Backend::kReference) {
    return reference::instance_norm_forward<float>(slices, plane, eps, x, y);
  }
  parallel::instance_norm_forward(slices, plane, eps, x, y);
}

void instance_norm_backward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dx) {
  if (backend() == Backend::kReference) {
    return reference::instance_norm_backward<float>(slices, plane, eps, x, dy, dx);
  }
  parallel::instance_norm_backward(slices, plane, eps, x, dy, dx);
}

}  // namespace lapgsr::kernels

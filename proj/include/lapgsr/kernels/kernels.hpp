#pragma once

// Float32 compute kernels behind the autodiff ops. Two backends exist:
// kReference runs the serial templates from reference.hpp, kParallel runs the
// OpenMP im2col/GEMM and table-driven kernels. The partition of work in the
// parallel backend does not depend on the thread count, so its results are
// bitwise identical for any number of threads.

#include <cstdint>
#include <span>

#include "lapgsr/kernels/geometry.hpp"

namespace lapgsr::kernels {

enum class Backend { kReference, kParallel };

void set_backend(Backend backend);
Backend backend();

/// Number of OpenMP threads used by the parallel backend (<= 0 means the
/// OpenMP default).
void set_num_threads(int threads);
int num_threads();

/// RAII override of the active backend.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

namespace parallel {
void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db);
void resize_forward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                    bool antialias, std::span<const float> x, std::span<float> y);
void resize_backward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                     bool antialias, std::span<const float> dy, std::span<float> dx);
void instance_norm_forward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                           std::span<float> y);
void instance_norm_backward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dx);
}  // namespace parallel

// Dispatch to the active backend. Backward kernels accumulate; an empty span
// skips that gradient.
void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db);
void resize_forward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                    bool antialias, std::span<const float> x, std::span<float> y);
void resize_backward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                     bool antialias, std::span<const float> dy, std::span<float> dx);
void instance_norm_forward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                           std::span<float> y);
void instance_norm_backward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dx);

}  // namespace lapgsr::kernels

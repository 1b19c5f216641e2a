#include <Eigen/Core>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "lapgsr/kernels/kernels.hpp"

namespace lapgsr::kernels::parallel {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// Output rows are processed in chunks so the im2col buffer stays near
// L2-sized. The chunk layout depends only on the geometry.
constexpr int64_t kChunkColumns = 4096;

struct Chunks {
  int64_t rows;
  int64_t count;
};

Chunks chunk_rows(const ConvGeometry& g) {
  const int64_t rows = std::max<int64_t>(1, kChunkColumns / std::max<int64_t>(1, g.out_w()));
  return {rows, (g.out_h() + rows - 1) / rows};
}

// Valid output-column range [lo, hi) for kernel column kx.
inline void valid_columns(const ConvGeometry& g, int64_t kx, int64_t& lo, int64_t& hi) {
  const int64_t ow = g.out_w();
  // ix = ox*stride - padding + kx must lie in [0, in_w).
  const int64_t first = g.padding - kx;
  lo = first <= 0 ? 0 : (first + g.stride - 1) / g.stride;
  const int64_t last = g.in_w - 1 + g.padding - kx;  // ox*stride <= last
  hi = last < 0 ? 0 : std::min(ow, last / g.stride + 1);
  if (hi < lo) hi = lo;
}

void im2col(const ConvGeometry& g, const float* x, int64_t oy0, int64_t oy1, float* col) {
  const int64_t ow = g.out_w(), k = g.kernel;
  const int64_t cols = (oy1 - oy0) * ow;
  for (int64_t ci = 0; ci < g.in_c; ++ci) {
    const float* plane = x + ci * g.in_h * g.in_w;
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        float* dst = col + ((ci * k + ky) * k + kx) * cols;
        int64_t lo, hi;
        valid_columns(g, kx, lo, hi);
        for (int64_t oy = oy0; oy < oy1; ++oy) {
          float* d = dst + (oy - oy0) * ow;
          const int64_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(d, d + ow, 0.0f);
            continue;
          }
          const float* src = plane + iy * g.in_w - g.padding + kx;
          std::fill(d, d + lo, 0.0f);
          if (g.stride == 1) {
            std::memcpy(d + lo, src + lo, static_cast<std::size_t>(hi - lo) * sizeof(float));
          } else {
            for (int64_t ox = lo; ox < hi; ++ox) d[ox] = src[ox * g.stride];
          }
          std::fill(d + hi, d + ow, 0.0f);
        }
      }
    }
  }
}

void col2im_accumulate(const ConvGeometry& g, const float* col, int64_t oy0, int64_t oy1,
                       float* dx) {
  const int64_t ow = g.out_w(), k = g.kernel;
  const int64_t cols = (oy1 - oy0) * ow;
  for (int64_t ci = 0; ci < g.in_c; ++ci) {
    float* plane = dx + ci * g.in_h * g.in_w;
    for (int64_t ky = 0; ky < k; ++ky) {
      for (int64_t kx = 0; kx < k; ++kx) {
        const float* src_row = col + ((ci * k + ky) * k + kx) * cols;
        int64_t lo, hi;
        valid_columns(g, kx, lo, hi);
        for (int64_t oy = oy0; oy < oy1; ++oy) {
          const int64_t iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const float* s = src_row + (oy - oy0) * ow;
          float* d = plane + iy * g.in_w - g.padding + kx;
          for (int64_t ox = lo; ox < hi; ++ox) d[ox * g.stride] += s[ox];
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
  const int64_t ohw = g.out_h() * g.out_w();
  const int64_t in_size = g.in_c * g.in_h * g.in_w;
  const Chunks chunks = chunk_rows(g);
  const int64_t tasks = g.batch * chunks.count;
  const RowMatrix weight = ConstMatrixMap(w.data(), g.out_c, g.patch_size());

#pragma omp parallel
  {
    RowMatrix col(g.patch_size(), chunks.rows * g.out_w());
    RowMatrix out;
#pragma omp for schedule(static)
    for (int64_t task = 0; task < tasks; ++task) {
      const int64_t n = task / chunks.count;
      const int64_t oy0 = (task % chunks.count) * chunks.rows;
      const int64_t oy1 = std::min(g.out_h(), oy0 + chunks.rows);
      const int64_t cols = (oy1 - oy0) * g.out_w();
      if (cols != col.cols()) col.resize(g.patch_size(), cols);
      im2col(g, x.data() + n * in_size, oy0, oy1, col.data());
      out.noalias() = weight * col;
      if (!b.empty()) {
        for (int64_t co = 0; co < g.out_c; ++co) out.row(co).array() += b[co];
      }
      StridedMap(y.data() + n * g.out_c * ohw + oy0 * g.out_w(), g.out_c, cols, Eigen::OuterStride<>(ohw)) = out;
    }
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                     std::span<const float> dy, std::span<float> dx, std::span<float> dw,
                     std::span<float> db) {
  const int64_t ohw = g.out_h() * g.out_w();
  const int64_t in_size = g.in_c * g.in_h * g.in_w;
  const Chunks chunks = chunk_rows(g);
  const int64_t psize = g.patch_size();
  const RowMatrix weight_t = ConstMatrixMap(w.data(), g.out_c, psize).transpose();
  const bool want_dw = !dw.empty(), want_db = !db.empty(), want_dx = !dx.empty();

  // Per-image partial sums keep the reduction order fixed.
  std::vector<RowMatrix> dw_part(want_dw ? static_cast<std::size_t>(g.batch) : 0);
  std::vector<float> db_part(want_db ? static_cast<std::size_t>(g.batch * g.out_c) : 0);

#pragma omp parallel
  {
    RowMatrix col(psize, chunks.rows * g.out_w());
    RowMatrix grad;
#pragma omp for schedule(static)
    for (int64_t n = 0; n < g.batch; ++n) {
      if (want_dw) dw_part[n] = RowMatrix::Zero(g.out_c, psize);
      for (int64_t c = 0; c < chunks.count; ++c) {
        const int64_t oy0 = c * chunks.rows;
        const int64_t oy1 = std::min(g.out_h(), oy0 + chunks.rows);
        const int64_t cols = (oy1 - oy0) * g.out_w();
        grad = ConstStridedMap(dy.data() + n * g.out_c * ohw + oy0 * g.out_w(), g.out_c, cols,
                               Eigen::OuterStride<>(ohw));
        if (cols != col.cols()) col.resize(psize, cols);
        if (want_dw) {
          im2col(g, x.data() + n * in_size, oy0, oy1, col.data());
          dw_part[n].noalias() += grad * col.transpose();
        }
        if (want_db) {
          for (int64_t co = 0; co < g.out_c; ++co) db_part[n * g.out_c + co] += grad.row(co).sum();
        }
        if (want_dx) {
          col.noalias() = weight_t * grad;
          col2im_accumulate(g, col.data(), oy0, oy1, dx.data() + n * in_size);
        }
      }
    }
  }
  for (int64_t n = 0; n < g.batch; ++n) {
    if (want_dw) {
      const float* p = dw_part[n].data();
      for (int64_t i = 0; i < g.weight_size(); ++i) dw[i] += p[i];
    }
    if (want_db) {
      for (int64_t co = 0; co < g.out_c; ++co) db[co] += db_part[n * g.out_c + co];
    }
  }
}

void resize_forward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                    bool antialias, std::span<const float> x, std::span<float> y) {
  const ResampleTable rows = make_resample_table(in_h, out_h, antialias);
  const ResampleTable cols = make_resample_table(in_w, out_w, antialias);
#pragma omp parallel
  {
    std::vector<float> tmp(static_cast<std::size_t>(in_h * out_w));
#pragma omp for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
      const float* src = x.data() + p * in_h * in_w;
      for (int64_t iy = 0; iy < in_h; ++iy) {
        const float* s = src + iy * in_w;
        float* t = tmp.data() + iy * out_w;
        for (int64_t ox = 0; ox < out_w; ++ox) {
          float acc = 0.0f;
          for (int64_t k = 0; k < cols.taps; ++k) {
            acc += cols.weight[ox * cols.taps + k] * s[cols.index[ox * cols.taps + k]];
          }
          t[ox] = acc;
        }
      }
      float* dst = y.data() + p * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy) {
        float* d = dst + oy * out_w;
        std::fill(d, d + out_w, 0.0f);
        for (int64_t k = 0; k < rows.taps; ++k) {
          const float wgt = rows.weight[oy * rows.taps + k];
          const float* t = tmp.data() + rows.index[oy * rows.taps + k] * out_w;
          for (int64_t ox = 0; ox < out_w; ++ox) d[ox] += wgt * t[ox];
        }
      }
    }
  }
}

void resize_backward(int64_t planes, int64_t in_h, int64_t in_w, int64_t out_h, int64_t out_w,
                     bool antialias, std::span<const float> dy, std::span<float> dx) {
  const ResampleTable rows = make_resample_table(in_h, out_h, antialias);
  const ResampleTable cols = make_resample_table(in_w, out_w, antialias);
#pragma omp parallel
  {
    std::vector<float> tmp(static_cast<std::size_t>(in_h * out_w));
#pragma omp for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
      std::fill(tmp.begin(), tmp.end(), 0.0f);
      const float* g = dy.data() + p * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const float* gr = g + oy * out_w;
        for (int64_t k = 0; k < rows.taps; ++k) {
          const float wgt = rows.weight[oy * rows.taps + k];
          float* t = tmp.data() + rows.index[oy * rows.taps + k] * out_w;
          for (int64_t ox = 0; ox < out_w; ++ox) t[ox] += wgt * gr[ox];
        }
      }
      float* d = dx.data() + p * in_h * in_w;
      for (int64_t iy = 0; iy < in_h; ++iy) {
        const float* t = tmp.data() + iy * out_w;
        float* dr = d + iy * in_w;
        for (int64_t ox = 0; ox < out_w; ++ox) {
          for (int64_t k = 0; k < cols.taps; ++k) {
            dr[cols.index[ox * cols.taps + k]] += cols.weight[ox * cols.taps + k] * t[ox];
          }
        }
      }
    }
  }
}

void instance_norm_forward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                           std::span<float> y) {
#pragma omp parallel for schedule(static)
  for (int64_t s = 0; s < slices; ++s) {
    const float* xs = x.data() + s * plane;
    double sum = 0.0;
    for (int64_t i = 0; i < plane; ++i) sum += xs[i];
    const double mean = sum / static_cast<double>(plane);
    double var = 0.0;
    for (int64_t i = 0; i < plane; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<double>(plane);
    const auto inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    const auto m = static_cast<float>(mean);
    float* ys = y.data() + s * plane;
    for (int64_t i = 0; i < plane; ++i) ys[i] = (xs[i] - m) * inv;
  }
}

void instance_norm_backward(int64_t slices, int64_t plane, float eps, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dx) {
#pragma omp parallel for schedule(static)
  for (int64_t s = 0; s < slices; ++s) {
    const float* xs = x.data() + s * plane;
    const float* gs = dy.data() + s * plane;
    double sum = 0.0;
    for (int64_t i = 0; i < plane; ++i) sum += xs[i];
    const double mean = sum / static_cast<double>(plane);
    double var = 0.0;
    for (int64_t i = 0; i < plane; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<double>(plane);
    const double inv = 1.0 / std::sqrt(var + eps);
    double mean_g = 0.0, mean_gx = 0.0;
    for (int64_t i = 0; i < plane; ++i) {
      mean_g += gs[i];
      mean_gx += gs[i] * (xs[i] - mean) * inv;
    }
    mean_g /= static_cast<double>(plane);
    mean_gx /= static_cast<double>(plane);
    float* ds = dx.data() + s * plane;
    for (int64_t i = 0; i < plane; ++i) {
      const double xhat = (xs[i] - mean) * inv;
      ds[i] += static_cast<float>(inv * (gs[i] - mean_g - xhat * mean_gx));
    }
  }
}

}  // namespace lapgsr::kernels::parallel

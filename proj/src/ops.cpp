#include "lapgsr/ops.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "lapgsr/error.hpp"
#include "lapgsr/kernels/kernels.hpp"

namespace lapgsr {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

// Elementwise unary op; `derivative(x, y)` gives dy/dx.
template <typename Forward, typename Derivative>
Tensor unary(Tape& tape, const Tensor& x, Forward forward, Derivative derivative) {
  Tensor y(x.shape());
  const auto xs = x.data();
  auto ys = y.data();
  const auto count = static_cast<int64_t>(xs.size());
#pragma omp parallel for schedule(static) if (count > 65536)
  for (int64_t i = 0; i < count; ++i) ys[i] = forward(xs[i]);
  if (tape.wants({&x})) {
    y.set_requires_grad(true);
    tape.record(y, [x, y, derivative]() mutable {
      const auto gy = y.grad();
      const auto xv = x.data();
      const auto yv = y.data();
      auto gx = x.mutable_grad();
      const auto n = static_cast<int64_t>(gy.size());
#pragma omp parallel for schedule(static) if (n > 65536)
      for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * derivative(xv[i], yv[i]);
    });
  }
  return y;
}

}  // namespace

void require_finite(const Tensor& x, const char* what) {
  const auto d = x.data();
  if (!std::all_of(d.begin(), d.end(), [](float v) { return std::isfinite(v); })) {
    throw NumericError(std::string("non-finite value in ") + what);
  }
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int64_t stride, int64_t padding) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  if (in.c != ws.c) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels but weight expects " +
                     std::to_string(ws.c));
  }
  if (bias.defined() && bias.numel() != ws.n) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) + " entries for " +
                     std::to_string(ws.n) + " output channels");
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  const kernels::ConvGeometry g{in.n, in.c, in.h, in.w, ws.n, ws.h, stride, padding};
  if (g.out_h() < 1 || g.out_w() < 1) {
    throw ShapeError("conv2d: input " + in.str() + " too small for kernel " +
                     std::to_string(ws.h));
  }
  Tensor y(Shape{in.n, ws.n, g.out_h(), g.out_w()});
  const std::span<const float> b = bias.defined() ? bias.data() : std::span<const float>{};
  kernels::conv2d_forward(g, input.data(), weight.data(), b, y.data());

  if (tape.wants({&input, &weight, &bias})) {
    y.set_requires_grad(true);
    tape.record(y, [g, input, weight, bias, y]() mutable {
      const std::span<float> dx = input.requires_grad() ? input.mutable_grad() : std::span<float>{};
      const std::span<float> dw =
          weight.requires_grad() ? weight.mutable_grad() : std::span<float>{};
      const std::span<float> db =
          bias.defined() && bias.requires_grad() ? bias.mutable_grad() : std::span<float>{};
      kernels::conv2d_backward(g, input.data(), weight.data(), y.grad(), dx, dw, db);
    });
  }
  return y;
}

Tensor leaky_relu(Tape& tape, const Tensor& x, float slope) {
  return unary(
      tape, x, [slope](float v) { return v >= 0.0f ? v : slope * v; },
      [slope](float v, float) { return v >= 0.0f ? 1.0f : slope; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor tanh_act(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Tensor softplus(Tape& tape, const Tensor& x) {
  return unary(
      tape, x,
      [](float v) { return std::max(v, 0.0f) + std::log1p(std::exp(-std::abs(v))); },
      [](float v, float) { return 1.0f / (1.0f + std::exp(-v)); });
}

Tensor square(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor affine(Tape& tape, const Tensor& x, float scale, float shift) {
  return unary(
      tape, x, [scale, shift](float v) { return scale * v + shift; },
      [scale](float, float) { return scale; });
}

Tensor instance_norm(Tape& tape, const Tensor& x, float eps) {
  const Shape& s = x.shape();
  if (s.plane() < 1) throw ShapeError("instance_norm: empty spatial extent " + s.str());
  Tensor y(s);
  kernels::instance_norm_forward(s.n * s.c, s.plane(), eps, x.data(), y.data());
  if (tape.wants({&x})) {
    y.set_requires_grad(true);
    tape.record(y, [x, y, eps]() mutable {
      const Shape& sh = x.shape();
      kernels::instance_norm_backward(sh.n * sh.c, sh.plane(), eps, x.data(), y.grad(),
                                      x.mutable_grad());
    });
  }
  return y;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  const auto av = a.data(), bv = b.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + bv[i];
  if (tape.wants({&a, &b})) {
    y.set_requires_grad(true);
    tape.record(y, [a, b, y]() mutable {
      const auto g = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return y;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return add(tape, a, affine(tape, b, -1.0f, 0.0f));
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor y(a.shape());
  const auto av = a.data(), bv = b.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * bv[i];
  if (tape.wants({&a, &b})) {
    y.set_requires_grad(true);
    tape.record(y, [a, b, y]() mutable {
      const auto g = y.grad();
      const auto av2 = a.data(), bv2 = b.data();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
      }
    });
  }
  return y;
}

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: incompatible " + sa.str() + " and " + sb.str());
  }
  const Shape out{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor y(out);
  const int64_t block_a = sa.c * sa.plane(), block_b = sb.c * sb.plane();
  auto yv = y.data();
  for (int64_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.data().begin() + n * block_a, block_a, yv.begin() + n * (block_a + block_b));
    std::copy_n(b.data().begin() + n * block_b, block_b,
                yv.begin() + n * (block_a + block_b) + block_a);
  }
  if (tape.wants({&a, &b})) {
    y.set_requires_grad(true);
    tape.record(y, [a, b, y, block_a, block_b]() mutable {
      const auto g = y.grad();
      const int64_t batch = a.shape().n;
      for (int64_t n = 0; n < batch; ++n) {
        const float* src = g.data() + n * (block_a + block_b);
        if (a.requires_grad()) {
          float* ga = a.mutable_grad().data() + n * block_a;
          for (int64_t i = 0; i < block_a; ++i) ga[i] += src[i];
        }
        if (b.requires_grad()) {
          float* gb = b.mutable_grad().data() + n * block_b;
          for (int64_t i = 0; i < block_b; ++i) gb[i] += src[block_a + i];
        }
      }
    });
  }
  return y;
}

Tensor resize(Tape& tape, const Tensor& x, int64_t out_h, int64_t out_w, bool antialias) {
  const Shape& s = x.shape();
  if (out_h < 1 || out_w < 1 || s.h < 1 || s.w < 1) {
    throw ShapeError("resize: invalid extents " + s.str() + " -> " + std::to_string(out_h) + "x" +
                     std::to_string(out_w));
  }
  Tensor y(Shape{s.n, s.c, out_h, out_w});
  kernels::resize_forward(s.n * s.c, s.h, s.w, out_h, out_w, antialias, x.data(), y.data());
  if (tape.wants({&x})) {
    y.set_requires_grad(true);
    tape.record(y, [x, y, antialias]() mutable {
      const Shape& in = x.shape();
      const Shape& out = y.shape();
      kernels::resize_backward(in.n * in.c, in.h, in.w, out.h, out.w, antialias, y.grad(),
                               x.mutable_grad());
    });
  }
  return y;
}

Tensor bicubic_resize(Tape& tape, const Tensor& x, ResizeScale scale) {
  const Shape& s = x.shape();
  if (scale == ResizeScale::kUp2) return resize(tape, x, s.h * 2, s.w * 2, false);
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("bicubic_resize: 0.5x needs even extents, got " + s.str());
  }
  return resize(tape, x, s.h / 2, s.w / 2, false);
}

Tensor mse(Tape& tape, const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  const auto p = pred.data(), t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  const auto count = static_cast<double>(p.size());
  Tensor y = Tensor::scalar(static_cast<float>(acc / count));
  if (tape.wants({&pred, &target})) {
    y.set_requires_grad(true);
    tape.record(y, [pred, target, y, count]() mutable {
      const float g = y.grad()[0];
      const auto pv = pred.data(), tv = target.data();
      const auto scale = static_cast<float>(2.0 / count) * g;
      if (pred.requires_grad()) {
        auto gp = pred.mutable_grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += scale * (pv[i] - tv[i]);
      }
      if (target.requires_grad()) {
        auto gt = target.mutable_grad();
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= scale * (pv[i] - tv[i]);
      }
    });
  }
  return y;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  Tensor y = Tensor::scalar(static_cast<float>(acc));
  if (tape.wants({&x})) {
    y.set_requires_grad(true);
    tape.record(y, [x, y]() mutable {
      const float g = y.grad()[0];
      for (float& v : x.mutable_grad()) v += g;
    });
  }
  return y;
}

Tensor mean(Tape& tape, const Tensor& x) {
  const auto count = static_cast<double>(x.numel());
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  Tensor y = Tensor::scalar(static_cast<float>(acc / count));
  if (tape.wants({&x})) {
    y.set_requires_grad(true);
    tape.record(y, [x, y, count]() mutable {
      const auto g = static_cast<float>(y.grad()[0] / count);
      for (float& v : x.mutable_grad()) v += g;
    });
  }
  return y;
}

}  // namespace lapgsr

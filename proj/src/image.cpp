#include "lapgsr/image.hpp"

#include <algorithm>

#include "lapgsr/error.hpp"

namespace lapgsr::image {

Tensor crop(const Tensor& x, int64_t y0, int64_t x0, int64_t h, int64_t w) {
  const Shape& s = x.shape();
  if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > s.h || x0 + w > s.w) {
    throw ShapeError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                     std::to_string(y0) + ", " + std::to_string(x0) + ") outside " + s.str());
  }
  Tensor out(Shape{s.n, s.c, h, w});
  const float* src = x.data().data();
  float* dst = out.data().data();
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    for (int64_t y = 0; y < h; ++y) {
      std::copy_n(src + (p * s.h + y0 + y) * s.w + x0, w, dst + (p * h + y) * w);
    }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor out(s);
  const float* src = x.data().data();
  float* dst = out.data().data();
  for (int64_t row = 0; row < s.n * s.c * s.h; ++row) {
    std::reverse_copy(src + row * s.w, src + (row + 1) * s.w, dst + row * s.w);
  }
  return out;
}

Tensor flip_vertical(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor out(s);
  const float* src = x.data().data();
  float* dst = out.data().data();
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    for (int64_t y = 0; y < s.h; ++y) {
      std::copy_n(src + (p * s.h + y) * s.w, s.w, dst + (p * s.h + (s.h - 1 - y)) * s.w);
    }
  }
  return out;
}

Tensor translate(const Tensor& x, int64_t dx, int64_t dy) {
  const Shape& s = x.shape();
  Tensor out(s);
  const float* src = x.data().data();
  float* dst = out.data().data();
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    for (int64_t y = 0; y < s.h; ++y) {
      const int64_t sy = std::clamp<int64_t>(y - dy, 0, s.h - 1);
      for (int64_t xx = 0; xx < s.w; ++xx) {
        const int64_t sx = std::clamp<int64_t>(xx - dx, 0, s.w - 1);
        dst[(p * s.h + y) * s.w + xx] = src[(p * s.h + sy) * s.w + sx];
      }
    }
  }
  return out;
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack: no tensors");
  const Shape& first = items.front().shape();
  int64_t total = 0;
  for (const Tensor& t : items) {
    const Shape& s = t.shape();
    if (s.c != first.c || s.h != first.h || s.w != first.w) {
      throw ShapeError("stack: " + s.str() + " incompatible with " + first.str());
    }
    total += s.n;
  }
  Tensor out(Shape{total, first.c, first.h, first.w});
  auto dst = out.data().begin();
  for (const Tensor& t : items) dst = std::copy(t.data().begin(), t.data().end(), dst);
  return out;
}

Tensor batch_item(const Tensor& x, int64_t index) {
  const Shape& s = x.shape();
  if (index < 0 || index >= s.n) throw ShapeError("batch_item: index out of range");
  const int64_t block = s.c * s.plane();
  Tensor out(Shape{1, s.c, s.h, s.w});
  std::copy_n(x.data().begin() + index * block, block, out.data().begin());
  return out;
}

Tensor to_rgb(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.c == 3) return x.detach();
  if (s.c != 1) throw ShapeError("to_rgb: expected 1 or 3 channels, got " + s.str());
  Tensor out(Shape{s.n, 3, s.h, s.w});
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < 3; ++c) {
      std::copy_n(x.data().begin() + n * s.plane(), s.plane(),
                  out.data().begin() + (n * 3 + c) * s.plane());
    }
  }
  return out;
}

Tensor hconcat(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("hconcat: no tensors");
  const Shape& first = items.front().shape();
  int64_t width = 0;
  for (const Tensor& t : items) {
    const Shape& s = t.shape();
    if (s.n != first.n || s.c != first.c || s.h != first.h) {
      throw ShapeError("hconcat: " + s.str() + " incompatible with " + first.str());
    }
    width += s.w;
  }
  Tensor out(Shape{first.n, first.c, first.h, width});
  for (int64_t row = 0; row < first.n * first.c * first.h; ++row) {
    int64_t x0 = 0;
    for (const Tensor& t : items) {
      const int64_t w = t.shape().w;
      std::copy_n(t.data().begin() + row * w, w, out.data().begin() + row * width + x0);
      x0 += w;
    }
  }
  return out;
}

}  // namespace lapgsr::image

#include "lapgsr/pyramid.hpp"

#include <algorithm>

#include "lapgsr/error.hpp"
#include "lapgsr/ops.hpp"

namespace lapgsr {

Tensor grayscale(const Tensor& rgb) {
  const Shape& s = rgb.shape();
  if (s.c != 3) throw ShapeError("grayscale: expected 3 channels, got " + s.str());
  Tensor gray(Shape{s.n, 1, s.h, s.w});
  const auto src = rgb.data();
  auto dst = gray.data();
  const int64_t plane = s.plane();
  for (int64_t n = 0; n < s.n; ++n) {
    const float* r = src.data() + n * 3 * plane;
    const float* g = r + plane;
    const float* b = g + plane;
    float* out = dst.data() + n * plane;
    for (int64_t i = 0; i < plane; ++i) out[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  }
  return gray;
}

LaplacianPyramid decompose(Tape& tape, const Tensor& image) {
  const Shape& s = image.shape();
  if (s.h % 4 != 0 || s.w % 4 != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("decompose: extents must be divisible by 4, got " + s.str());
  }
  const Tensor g1 = bicubic_resize(tape, image, ResizeScale::kDown2);
  const Tensor g2 = bicubic_resize(tape, g1, ResizeScale::kDown2);
  LaplacianPyramid p;
  p.band_fine = sub(tape, image, bicubic_resize(tape, g1, ResizeScale::kUp2));
  p.band_mid = sub(tape, g1, bicubic_resize(tape, g2, ResizeScale::kUp2));
  p.residual = g2;
  return p;
}

PyramidLevels build_modified_pyramid(const Tensor& guide, const Tensor& thermal_lr) {
  const Shape& g = guide.shape();
  const Shape& t = thermal_lr.shape();
  if (g.h != 4 * t.h || g.w != 4 * t.w || g.n != t.n || g.c != t.c) {
    throw ShapeError("build_modified_pyramid: guide " + g.str() +
                     " must be exactly 4x the thermal image " + t.str());
  }
  Tape untracked(Tape::Mode::kInference);
  LaplacianPyramid p = decompose(untracked, guide);
  return PyramidLevels{p.band_fine, p.band_mid, thermal_lr};
}

Tensor collapse_raw(Tape& tape, const TranslatedLayers& layers) {
  const Shape& lo = layers.low.shape();
  const Shape& mi = layers.mid.shape();
  const Shape& hi = layers.high.shape();
  if (mi.h != 2 * lo.h || mi.w != 2 * lo.w || hi.h != 2 * mi.h || hi.w != 2 * mi.w ||
      lo.n != mi.n || mi.n != hi.n || lo.c != mi.c || mi.c != hi.c) {
    throw ShapeError("collapse: layer extents " + lo.str() + ", " + mi.str() + ", " + hi.str() +
                     " do not chain by factors of 2");
  }
  const Tensor mid = add(tape, layers.mid, bicubic_resize(tape, layers.low, ResizeScale::kUp2));
  return add(tape, layers.high, bicubic_resize(tape, mid, ResizeScale::kUp2));
}

Tensor collapse(Tape& tape, const TranslatedLayers& layers) {
  return clamp01(collapse_raw(tape, layers));
}

Tensor clamp01(const Tensor& x) {
  Tensor y(x.shape());
  std::transform(x.data().begin(), x.data().end(), y.data().begin(),
                 [](float v) { return std::clamp(v, 0.0f, 1.0f); });
  return y;
}

}  // namespace lapgsr

#pragma once

#include "lapgsr/tensor.hpp"

namespace lapgsr {

/// Three-level Laplacian decomposition of an image with extents divisible
/// by 4: two band-pass levels and the quarter-resolution low-pass residual.
struct LaplacianPyramid {
  Tensor band_fine;  // H x W
  Tensor band_mid;   // H/2 x W/2
  Tensor residual;   // H/4 x W/4
};

/// Guide pyramid with its residual slot holding the low-resolution thermal
/// image. l3 is the finest band, l2 the middle band, l1 the thermal image.
struct PyramidLevels {
  Tensor l3;
  Tensor l2;
  Tensor l1;
};

/// Outputs of the three translation branches, coarse to fine.
struct TranslatedLayers {
  Tensor low;   // H/4 x W/4
  Tensor mid;   // H/2 x W/2
  Tensor high;  // H x W
};

/// Luminance 0.299 R + 0.587 G + 0.114 B of a 3-channel image.
Tensor grayscale(const Tensor& rgb);

/// G1 = down2(G0), G2 = down2(G1); band_fine = G0 - up2(G1),
/// band_mid = G1 - up2(G2), residual = G2.
LaplacianPyramid decompose(Tape& tape, const Tensor& image);

/// Decomposes `guide` and substitutes `thermal_lr` (bit-identical) for the
/// residual. Throws ShapeError unless the guide is exactly 4x the thermal
/// image in both extents with matching batch and channel counts.
PyramidLevels build_modified_pyramid(const Tensor& guide, const Tensor& thermal_lr);

/// Cascading inverse Laplacian: high + up2(mid + up2(low)), unclamped.
Tensor collapse_raw(Tape& tape, const TranslatedLayers& layers);

/// collapse_raw clamped to [0, 1] (metric-facing prediction).
Tensor collapse(Tape& tape, const TranslatedLayers& layers);

/// Elementwise clamp to [0, 1]; not differentiable.
Tensor clamp01(const Tensor& x);

}  // namespace lapgsr

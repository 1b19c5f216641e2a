#pragma once

// Non-differentiable image utilities on NCHW tensors.

#include <cstdint>
#include <vector>

#include "lapgsr/tensor.hpp"

namespace lapgsr::image {

/// Window [y0, y0+h) x [x0, x0+w) of every plane.
Tensor crop(const Tensor& x, int64_t y0, int64_t x0, int64_t h, int64_t w);
Tensor flip_horizontal(const Tensor& x);
Tensor flip_vertical(const Tensor& x);
/// out(y, x) = in(clamp(y - dy), clamp(x - dx)): content moves by (dx, dy)
/// with replicated borders.
Tensor translate(const Tensor& x, int64_t dx, int64_t dy);
/// Concatenates along the batch axis; all inputs must share C, H, W.
Tensor stack(const std::vector<Tensor>& items);
/// Single batch entry as an N=1 tensor.
Tensor batch_item(const Tensor& x, int64_t index);
/// Replicates a 1-channel image to 3 channels; 3-channel input is copied.
Tensor to_rgb(const Tensor& x);
/// Side-by-side concatenation along width; inputs must share N, C, H.
Tensor hconcat(const std::vector<Tensor>& items);

}  // namespace lapgsr::image

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lapgsr/data_io.hpp"
#include "lapgsr/error.hpp"

namespace lapgsr {

namespace fs = std::filesystem;

Tensor decode_image(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot decode " + path.string() + ": " + img.message);
  }
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    throw IoError(path.string() + ": 16-bit images are not supported (8-bit PNG only)");
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  const int64_t channels = color ? 3 : 1;
  const int64_t stored = channels + (alpha ? 1 : 0);
  img.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                     : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  const auto h = static_cast<int64_t>(img.height), w = static_cast<int64_t>(img.width);
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode " + path.string() + ": " + msg);
  }
  Tensor out(Shape{1, channels, h, w});
  auto dst = out.data();
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < channels; ++c) {
        dst[(c * h + y) * w + x] = static_cast<float>(buffer[(y * w + x) * stored + c]) / 255.0f;
      }
    }
  }
  return out;
}

void encode_image(const fs::path& path, const Tensor& image) {
  const Shape& s = image.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) {
    throw ShapeError("encode_image: expected 1x1xHxW or 1x3xHxW, got " + s.str());
  }
  std::vector<png_byte> buffer(static_cast<std::size_t>(s.numel()));
  const auto src = image.data();
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      for (int64_t c = 0; c < s.c; ++c) {
        const float v = std::clamp(src[(c * s.h + y) * s.w + x], 0.0f, 1.0f);
        buffer[(y * s.w + x) * s.c + c] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(s.w);
  img.height = static_cast<png_uint_32>(s.h);
  img.format = s.c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + img.message);
  }
}

}  // namespace lapgsr

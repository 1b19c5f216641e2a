#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "lapgsr/data_io.hpp"
#include "lapgsr/error.hpp"
#include "lapgsr/ops.hpp"
#include "lapgsr/rng.hpp"

namespace lapgsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kMinShapes = 5;
constexpr int kMaxShapes = 20;
constexpr int kSupersample = 4;
constexpr double kMinRadius = 0.04;  // fraction of min(W, H)
constexpr double kMaxRadius = 0.25;
constexpr double kTextureSigma = 0.02;
constexpr double kThermalBlurSigma = 1.0;

struct Primitive {
  bool ellipse;
  double cx, cy, rx, ry, cos_a, sin_a;
  float color[3];
  float temperature;

  bool covers(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * cos_a + dy * sin_a) / rx;
    const double v = (-dx * sin_a + dy * cos_a) / ry;
    return ellipse ? (u * u + v * v <= 1.0) : (std::abs(u) <= 1.0 && std::abs(v) <= 1.0);
  }
};

struct Scene {
  float background[3];
  float background_temperature;
  std::vector<Primitive> shapes;
};

Scene random_scene(Rng& rng, int64_t width, int64_t height) {
  Scene scene;
  for (float& c : scene.background) c = static_cast<float>(rng.uniform(0.05, 0.95));
  scene.background_temperature = static_cast<float>(rng.uniform(0.1, 0.4));
  const auto count = rng.uniform_int(kMinShapes, kMaxShapes);
  const double extent = static_cast<double>(std::min(width, height));
  for (int64_t i = 0; i < count; ++i) {
    Primitive p;
    p.ellipse = rng.bernoulli(0.5);
    p.cx = rng.uniform(0.0, static_cast<double>(width));
    p.cy = rng.uniform(0.0, static_cast<double>(height));
    p.rx = rng.uniform(kMinRadius, kMaxRadius) * extent;
    p.ry = rng.uniform(kMinRadius, kMaxRadius) * extent;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    p.cos_a = std::cos(angle);
    p.sin_a = std::sin(angle);
    for (float& c : p.color) c = static_cast<float>(rng.uniform(0.05, 0.95));
    p.temperature = static_cast<float>(rng.uniform(0.0, 1.0));
    scene.shapes.push_back(p);
  }
  return scene;
}

// Anti-aliased render: each pixel averages a kSupersample^2 grid of the
// topmost covering primitive.
void render(const Scene& scene, int64_t width, int64_t height, Tensor& color, Tensor& heat) {
  color = Tensor(Shape{1, 3, height, width});
  heat = Tensor(Shape{1, 1, height, width});
  auto cd = color.data();
  auto hd = heat.data();
  const int64_t plane = width * height;
  constexpr double inv = 1.0 / (kSupersample * kSupersample);
  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      double acc[4] = {0, 0, 0, 0};
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double px = static_cast<double>(x) + (sx + 0.5) / kSupersample;
          const double py = static_cast<double>(y) + (sy + 0.5) / kSupersample;
          const float* rgb = scene.background;
          float t = scene.background_temperature;
          for (auto it = scene.shapes.rbegin(); it != scene.shapes.rend(); ++it) {
            if (it->covers(px, py)) {
              rgb = it->color;
              t = it->temperature;
              break;
            }
          }
          acc[0] += rgb[0];
          acc[1] += rgb[1];
          acc[2] += rgb[2];
          acc[3] += t;
        }
      }
      for (int c = 0; c < 3; ++c) cd[c * plane + y * width + x] = static_cast<float>(acc[c] * inv);
      hd[y * width + x] = static_cast<float>(acc[3] * inv);
    }
  }
}

// Separable Gaussian blur with replicated borders.
Tensor gaussian_blur(const Tensor& x, double sigma) {
  const auto radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  const Shape& s = x.shape();
  Tensor tmp(s), out(s);
  const auto src = x.data();
  auto t = tmp.data();
  auto dst = out.data();
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    for (int64_t yy = 0; yy < s.h; ++yy) {
      for (int64_t xx = 0; xx < s.w; ++xx) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i) {
          const int64_t sx = std::clamp<int64_t>(xx + i, 0, s.w - 1);
          acc += k[i + radius] * src[(p * s.h + yy) * s.w + sx];
        }
        t[(p * s.h + yy) * s.w + xx] = static_cast<float>(acc);
      }
    }
    for (int64_t yy = 0; yy < s.h; ++yy) {
      for (int64_t xx = 0; xx < s.w; ++xx) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i) {
          const int64_t sy = std::clamp<int64_t>(yy + i, 0, s.h - 1);
          acc += k[i + radius] * t[(p * s.h + sy) * s.w + xx];
        }
        dst[(p * s.h + yy) * s.w + xx] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

std::string sample_id(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(i));
  return buf;
}

}  // namespace

fs::path synth_generate(const SynthOptions& o, const fs::path& out_dir) {
  if (o.width <= 0 || o.height <= 0 || o.width % 4 != 0 || o.height % 4 != 0) {
    throw ConfigError("extents must be divisible by 4 (got " + std::to_string(o.width) + "x" +
                      std::to_string(o.height) + ")");
  }
  if (o.count < 1) throw ConfigError("synth: count must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + out_dir.string());
  }

  const auto n_val = static_cast<int64_t>(std::llround(static_cast<double>(o.count) * o.val_fraction));
  const auto n_test = static_cast<int64_t>(std::llround(static_cast<double>(o.count) * o.test_fraction));
  const int64_t n_train = o.count - n_val - n_test;
  if (n_train < 0) throw ConfigError("synth: split fractions exceed 1");

  Rng rng(o.seed);
  Tape untracked(Tape::Mode::kInference);
  json samples = json::array();
  json splits{{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  for (int64_t i = 0; i < o.count; ++i) {
    const std::string id = sample_id(i);
    const char* split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    const Scene scene = random_scene(rng, o.width, o.height);
    Tensor color, heat;
    render(scene, o.width, o.height, color, heat);
    for (float& v : color.data()) {
      v = std::clamp(v + static_cast<float>(kTextureSigma * rng.normal()), 0.0f, 1.0f);
    }
    const Tensor thermal_hr = gaussian_blur(heat, kThermalBlurSigma);
    const Tensor thermal_lr = resize(untracked, thermal_hr, o.height / 4, o.width / 4, true);

    const fs::path split_dir = out_dir / split;
    encode_image(split_dir / "rgb" / (id + ".png"), color);
    encode_image(split_dir / "thermal_hr" / (id + ".png"), thermal_hr);
    encode_image(split_dir / "thermal_lr" / (id + ".png"), thermal_lr);
    splits[split].push_back(id);
    samples.push_back({{"id", id},
                       {"split", split},
                       {"shapes", scene.shapes.size()},
                       {"hr", {o.width, o.height}},
                       {"lr", {o.width / 4, o.height / 4}}});
  }

  const json manifest{
      {"generator", "lapgsr-synth"},
      {"version", 1},
      {"count", o.count},
      {"seed", o.seed},
      {"width", o.width},
      {"height", o.height},
      {"parameters",
       {{"shapes_min", kMinShapes},
        {"shapes_max", kMaxShapes},
        {"supersample", kSupersample},
        {"radius_fraction", {kMinRadius, kMaxRadius}},
        {"texture_sigma", kTextureSigma},
        {"thermal_blur_sigma", kThermalBlurSigma},
        {"thermal_lr", "bicubic 0.25x, antialiased"}}},
      {"splits", splits},
      {"samples", samples}};
  const fs::path path = out_dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
  return path;
}

}  // namespace lapgsr

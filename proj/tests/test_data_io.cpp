#include <png.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"
#include "lapgsr/data_io.hpp"
#include "lapgsr/error.hpp"
#include "lapgsr/pyramid.hpp"
#include "support.hpp"

namespace lapgsr {
namespace {

namespace fs = std::filesystem;
using testing::max_abs_diff;
using testing::read_file;
using testing::TempDir;

void write_raw_png(const fs::path& path, int w, int h, png_uint_32 format, const void* pixels) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  ASSERT_TRUE(png_image_write_to_file(&img, path.c_str(), 0, pixels, 0, nullptr)) << img.message;
}

Tensor quantized(const Shape& s, Rng& rng) {
  Tensor t(s);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
  return t;
}

TEST(ImageIo, RoundTripGrayAndRgb) {
  TempDir dir("io_roundtrip");
  Rng rng(1);
  for (const Shape& s : {Shape{1, 1, 7, 9}, Shape{1, 3, 4, 5}}) {
    const Tensor t = quantized(s, rng);
    encode_image(dir.path() / "x.png", t);
    const Tensor back = decode_image(dir.path() / "x.png");
    EXPECT_EQ(back.shape(), s);
    EXPECT_EQ(max_abs_diff(back.data(), t.data()), 0.0);
  }
  EXPECT_THROW(encode_image(dir.path() / "y.png", Tensor(Shape{2, 1, 4, 4})), ShapeError);
  EXPECT_THROW(encode_image(dir.path() / "y.png", Tensor(Shape{1, 2, 4, 4})), ShapeError);
}

TEST(ImageIo, EightBitScaling) {
  TempDir dir("io_scaling");
  const std::vector<uint8_t> px{0, 128, 255, 1};
  write_raw_png(dir.path() / "g.png", 4, 1, PNG_FORMAT_GRAY, px.data());
  const Tensor t = decode_image(dir.path() / "g.png");
  EXPECT_EQ(t.data()[0], 0.0f);
  EXPECT_EQ(t.data()[1], 128.0f / 255.0f);
  EXPECT_EQ(t.data()[2], 1.0f);
  EXPECT_EQ(t.data()[3], 1.0f / 255.0f);

  const Tensor over(Shape{1, 1, 1, 3}, std::vector<float>{-0.5f, 0.5f, 1.5f});
  encode_image(dir.path() / "c.png", over);
  const Tensor clamped = decode_image(dir.path() / "c.png");
  EXPECT_EQ(clamped.data()[0], 0.0f);
  EXPECT_EQ(clamped.data()[1], 128.0f / 255.0f);
  EXPECT_EQ(clamped.data()[2], 1.0f);
}

TEST(ImageIo, AlphaDroppedAndSixteenBitRejected) {
  TempDir dir("io_formats");
  const std::vector<uint8_t> rgba{255, 0, 0, 10, 0, 255, 0, 200};
  write_raw_png(dir.path() / "a.png", 2, 1, PNG_FORMAT_RGBA, rgba.data());
  const Tensor t = decode_image(dir.path() / "a.png");
  EXPECT_EQ(t.shape(), (Shape{1, 3, 1, 2}));
  EXPECT_EQ(t.at(0, 0, 0, 0), 1.0f);
  EXPECT_EQ(t.at(0, 1, 0, 1), 1.0f);

  const std::vector<uint16_t> deep{0, 1000, 65535, 42};
  write_raw_png(dir.path() / "d.png", 4, 1, PNG_FORMAT_LINEAR_Y, deep.data());
  try {
    decode_image(dir.path() / "d.png");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("16-bit"), std::string::npos) << e.what();
  }
  {
    std::ofstream(dir.path() / "junk.png") << "not a png";
  }
  EXPECT_THROW(decode_image(dir.path() / "junk.png"), IoError);
  EXPECT_THROW(decode_image(dir.path() / "absent.png"), IoError);
}

void write_sample(const fs::path& split, const std::string& id, int64_t h, int64_t w, int64_t lh, int64_t lw) {
  for (const char* sub : {"rgb", "thermal_hr", "thermal_lr"}) fs::create_directories(split / sub);
  encode_image(split / "rgb" / (id + ".png"), Tensor(Shape{1, 3, h, w}, 0.5f));
  encode_image(split / "thermal_hr" / (id + ".png"), Tensor(Shape{1, 1, h, w}, 0.25f));
  encode_image(split / "thermal_lr" / (id + ".png"), Tensor(Shape{1, 1, lh, lw}, 0.25f));
}

TEST(Dataset, LoadsSplitsInIdOrder) {
  TempDir dir("ds_ok");
  for (const char* id : {"b", "a", "c"}) write_sample(dir.path() / "train", id, 16, 24, 4, 6);
  write_sample(dir.path() / "test", "z", 16, 24, 4, 6);
  const DatasetSplit gray = load_dataset(dir.path(), GuideMode::kGrayscale);
  ASSERT_EQ(gray.train.size(), 3u);
  EXPECT_EQ(gray.train[0].id, "a");
  EXPECT_EQ(gray.train[2].id, "c");
  EXPECT_TRUE(gray.val.empty());
  EXPECT_EQ(gray.test.size(), 1u);
  EXPECT_EQ(gray.train[0].guide.shape(), (Shape{1, 1, 16, 24}));
  EXPECT_NEAR(gray.train[0].guide.data()[0], 128.0f / 255.0f, 1e-6);
  EXPECT_EQ(gray.train[0].thermal_lr.shape(), (Shape{1, 1, 4, 6}));
  EXPECT_EQ(&gray.split("test"), &gray.test);
  EXPECT_THROW(gray.split("dev"), ConfigError);

  // Color mode needs 3-channel thermal images.
  EXPECT_THROW(load_dataset(dir.path(), GuideMode::kColor), ShapeError);
  EXPECT_THROW(load_dataset(dir.path() / "nowhere", GuideMode::kGrayscale), IoError);
  EXPECT_EQ(guide_mode_name(parse_guide_mode("color")), "color");
  EXPECT_THROW(parse_guide_mode("rgb"), ConfigError);
}

TEST(Dataset, MissingCounterpartNamesTheId) {
  TempDir dir("ds_missing");
  write_sample(dir.path() / "val", "s042", 16, 16, 4, 4);
  fs::remove(dir.path() / "val" / "thermal_lr" / "s042.png");
  try {
    load_dataset(dir.path(), GuideMode::kGrayscale);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("s042"), std::string::npos) << e.what();
  }
}

TEST(Dataset, ExtentMismatchesAreRejected) {
  TempDir dir("ds_extent");
  write_sample(dir.path() / "train", "odd", 16, 16, 4, 5);
  EXPECT_THROW(load_dataset(dir.path(), GuideMode::kGrayscale), ShapeError);
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

TEST(Synth, DeterministicLayoutAndSplits) {
  TempDir a("synth_a"), b("synth_b"), c("synth_c");
  SynthOptions opt;
  opt.count = 10;
  opt.seed = 9;
  opt.width = 64;
  opt.height = 48;
  const fs::path manifest = synth_generate(opt, a.path());
  synth_generate(opt, b.path());
  EXPECT_EQ(tree_bytes(a.path()), tree_bytes(b.path()));
  opt.seed = 10;
  synth_generate(opt, c.path());
  EXPECT_NE(tree_bytes(a.path()), tree_bytes(c.path()));

  const nlohmann::json m = nlohmann::json::parse(read_file(manifest));
  EXPECT_EQ(m.at("count"), 10);
  EXPECT_EQ(m.at("samples").size(), 10u);
  const DatasetSplit d = load_dataset(a.path(), GuideMode::kGrayscale);
  EXPECT_EQ(d.train.size(), 8u);
  EXPECT_EQ(d.val.size(), 1u);
  EXPECT_EQ(d.test.size(), 1u);
  EXPECT_EQ(d.train[0].thermal_hr.shape(), (Shape{1, 1, 48, 64}));
  EXPECT_EQ(d.train[0].thermal_lr.shape(), (Shape{1, 1, 12, 16}));
  EXPECT_THROW(load_dataset(a.path(), GuideMode::kColor), ShapeError);
}

TEST(Synth, RejectsBadExtents) {
  TempDir dir("synth_bad");
  SynthOptions opt;
  opt.count = 2;
  opt.width = 321;
  try {
    synth_generate(opt, dir.path());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("321"), std::string::npos) << e.what();
  }
}

// Central-difference gradient magnitude; borders are zero.
std::vector<double> gradient_magnitude(const Tensor& t) {
  const int64_t h = t.shape().h, w = t.shape().w;
  std::vector<double> g(static_cast<std::size_t>(h * w), 0.0);
  for (int64_t y = 1; y + 1 < h; ++y) {
    for (int64_t x = 1; x + 1 < w; ++x) {
      const double gx = t.at(0, 0, y, x + 1) - t.at(0, 0, y, x - 1);
      const double gy = t.at(0, 0, y + 1, x) - t.at(0, 0, y - 1, x);
      g[static_cast<std::size_t>(y * w + x)] = std::hypot(gx, gy);
    }
  }
  return g;
}

double quantile(std::vector<double> v, double q) {
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::ranges::nth_element(v, v.begin() + static_cast<std::ptrdiff_t>(k));
  return v[k];
}

TEST(Synth, ThermalEdgesCoincideWithGuideEdges) {
  TempDir dir("synth_edges");
  SynthOptions opt;
  opt.count = 10;
  opt.seed = 3;
  opt.val_fraction = opt.test_fraction = 0.0;
  synth_generate(opt, dir.path());
  const DatasetSplit d = load_dataset(dir.path(), GuideMode::kGrayscale);
  ASSERT_EQ(d.train.size(), 10u);
  int64_t strong = 0, matched = 0;
  for (const SamplePair& s : d.train) {
    const int64_t h = s.guide.shape().h, w = s.guide.shape().w;
    const auto gt = gradient_magnitude(s.thermal_hr);
    const auto gg = gradient_magnitude(s.guide);
    const double t_thresh = std::max(quantile(gt, 0.9), 1e-9);
    const double g_thresh = quantile(gg, 0.9);
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        if (gt[static_cast<std::size_t>(y * w + x)] < t_thresh) continue;
        ++strong;
        bool near = false;
        for (int64_t dy = -2; dy <= 2 && !near; ++dy) {
          for (int64_t dx = -2; dx <= 2 && !near; ++dx) {
            const int64_t yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            near = gg[static_cast<std::size_t>(yy * w + xx)] >= g_thresh;
          }
        }
        matched += near;
      }
    }
  }
  ASSERT_GT(strong, 0);
  const double fraction = static_cast<double>(matched) / static_cast<double>(strong);
  EXPECT_GT(fraction, 0.8) << "coincidence " << fraction;
}

}  // namespace
}  // namespace lapgsr

#include <algorithm>
#include <set>

#include "lapgsr/data_io.hpp"
#include "lapgsr/error.hpp"
#include "lapgsr/pyramid.hpp"

namespace lapgsr {

namespace fs = std::filesystem;

GuideMode parse_guide_mode(std::string_view name) {
  if (name == "gray" || name == "grayscale") return GuideMode::kGrayscale;
  if (name == "color") return GuideMode::kColor;
  throw ConfigError("unknown guide mode '" + std::string(name) + "' (expected gray or color)");
}

std::string_view guide_mode_name(GuideMode mode) {
  return mode == GuideMode::kGrayscale ? "gray" : "color";
}

const std::vector<SamplePair>& DatasetSplit::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

namespace {

std::set<std::string> png_ids(const fs::path& dir) {
  std::set<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      ids.insert(entry.path().stem().string());
    }
  }
  return ids;
}

void require_channels(const Tensor& t, int64_t channels, const fs::path& path) {
  if (t.shape().c != channels) {
    throw ShapeError(path.string() + " has " + std::to_string(t.shape().c) +
                     " channels; this guide mode needs " + std::to_string(channels));
  }
}

}  // namespace

std::vector<SamplePair> load_split(const fs::path& split_dir, GuideMode mode) {
  const fs::path rgb_dir = split_dir / "rgb";
  const fs::path lr_dir = split_dir / "thermal_lr";
  const fs::path hr_dir = split_dir / "thermal_hr";
  const auto rgb_ids = png_ids(rgb_dir);
  const auto lr_ids = png_ids(lr_dir);
  const auto hr_ids = png_ids(hr_dir);

  for (const std::string& id : rgb_ids) {
    if (!lr_ids.contains(id)) throw IoError("sample '" + id + "' has no " + (lr_dir / (id + ".png")).string());
    if (!hr_ids.contains(id)) throw IoError("sample '" + id + "' has no " + (hr_dir / (id + ".png")).string());
  }
  for (const auto* other : {&lr_ids, &hr_ids}) {
    for (const std::string& id : *other) {
      if (!rgb_ids.contains(id)) throw IoError("sample '" + id + "' has no " + (rgb_dir / (id + ".png")).string());
    }
  }

  const int64_t channels = mode == GuideMode::kGrayscale ? 1 : 3;
  std::vector<SamplePair> samples;
  for (const std::string& id : rgb_ids) {
    const fs::path gp = rgb_dir / (id + ".png");
    const fs::path lp = lr_dir / (id + ".png");
    const fs::path hp = hr_dir / (id + ".png");
    SamplePair s;
    s.id = id;
    s.guide = decode_image(gp);
    if (mode == GuideMode::kGrayscale && s.guide.shape().c == 3) s.guide = grayscale(s.guide);
    require_channels(s.guide, channels, gp);
    s.thermal_lr = decode_image(lp);
    require_channels(s.thermal_lr, channels, lp);
    s.thermal_hr = decode_image(hp);
    require_channels(s.thermal_hr, channels, hp);

    const Shape& g = s.guide.shape();
    const Shape& lr = s.thermal_lr.shape();
    const Shape& hr = s.thermal_hr.shape();
    if (hr.h != g.h || hr.w != g.w) {
      throw ShapeError("sample '" + id + "': thermal_hr " + std::to_string(hr.w) + "x" +
                       std::to_string(hr.h) + " differs from guide " + std::to_string(g.w) + "x" +
                       std::to_string(g.h));
    }
    if (g.h != 4 * lr.h || g.w != 4 * lr.w) {
      throw ShapeError("sample '" + id + "': guide " + std::to_string(g.w) + "x" +
                       std::to_string(g.h) + " is not exactly 4x thermal_lr " +
                       std::to_string(lr.w) + "x" + std::to_string(lr.h));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

DatasetSplit load_dataset(const fs::path& root, GuideMode mode) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " does not exist");
  DatasetSplit ds;
  ds.mode = mode;
  ds.train = load_split(root / "train", mode);
  ds.val = load_split(root / "val", mode);
  ds.test = load_split(root / "test", mode);
  return ds;
}

}  // namespace lapgsr

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lapgsr/tensor.hpp"

namespace lapgsr {

/// kGrayscale converts RGB guides to luminance and expects 1-channel
/// thermal images; kColor keeps 3-channel guides and thermal images.
enum class GuideMode { kGrayscale, kColor };

GuideMode parse_guide_mode(std::string_view name);
std::string_view guide_mode_name(GuideMode mode);

struct SamplePair {
  std::string id;
  Tensor guide;       // 1 x C x H x W
  Tensor thermal_lr;  // 1 x C x H/4 x W/4
  Tensor thermal_hr;  // 1 x C x H x W
};

struct DatasetSplit {
  GuideMode mode = GuideMode::kGrayscale;
  std::vector<SamplePair> train;
  std::vector<SamplePair> val;
  std::vector<SamplePair> test;

  /// "train", "val" or "test"; throws ConfigError otherwise.
  const std::vector<SamplePair>& split(std::string_view name) const;
};

/// Decodes an 8-bit grayscale or RGB PNG into a 1 x {1,3} x H x W tensor with
/// values v / 255. Alpha is dropped. 16-bit files are rejected with IoError.
Tensor decode_image(const std::filesystem::path& path);

/// Writes a 1 x {1,3} x H x W tensor as an 8-bit PNG, mapping [0, 1] to
/// round(255 v) with clamping.
void encode_image(const std::filesystem::path& path, const Tensor& image);

/// Loads root/{train,val,test}/{rgb,thermal_lr,thermal_hr}/<id>.png. Missing
/// split directories yield empty splits. Every id must exist in all three
/// folders, thermal_hr must match the guide extents and thermal_lr must be
/// exactly a quarter of them.
DatasetSplit load_dataset(const std::filesystem::path& root, GuideMode mode);
std::vector<SamplePair> load_split(const std::filesystem::path& split_dir, GuideMode mode);

struct SynthOptions {
  int64_t count = 50;
  uint64_t seed = 0;
  int64_t width = 320;
  int64_t height = 240;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
};

/// Writes a procedural RGB/thermal corpus in the load_dataset layout plus
/// out_dir/manifest.json, and returns the manifest path. Output bytes depend
/// only on the options. Throws ConfigError unless the extents are positive
/// multiples of 4.
std::filesystem::path synth_generate(const SynthOptions& options,
                                     const std::filesystem::path& out_dir);

}  // namespace lapgsr

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lapgsr/pyramid.hpp"
#include "lapgsr/rng.hpp"
#include "lapgsr/tensor.hpp"

namespace lapgsr {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Residual-block counts and channel widths of the three translation
/// branches.
///
/// The low branch opens with a narrow `stem_ltb`-channel convolution and
/// widens to `width_ltb` before its residual blocks; it narrows back through
/// `stem_ltb` channels before emitting the image-shaped output. With
/// stem_ltb = 0 the low branch instead runs width_ltb channels end to end.
struct GeneratorConfig {
  int64_t blocks_ltb = 2;
  int64_t blocks_mtb = 3;
  int64_t blocks_htb = 3;
  int64_t width_ltb = 64;
  int64_t width_mtb = 64;
  int64_t width_htb = 12;
  int64_t stem_ltb = 16;
  int64_t channels = 1;
  int64_t scale = 4;

  /// Throws ConfigError on any invalid field. Accounting functions accept
  /// zero-block configs; a constructed Generator needs at least one block
  /// per branch.
  void validate(bool allow_zero_blocks = false) const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

void to_json(nlohmann::json& j, const GeneratorConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, GeneratorConfig& cfg);

/// 2-D convolution layer with He-initialized weights and zero bias.
struct Conv2d {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [1, out, 1, 1]
  int64_t stride = 1;
  int64_t padding = 1;

  static Conv2d make(int64_t in_c, int64_t out_c, int64_t kernel, int64_t stride,
                     int64_t padding, Rng& rng);
  Tensor operator()(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

/// x + conv2(leaky_relu(conv1(x))).
struct ResidualBlock {
  Conv2d conv1;
  Conv2d conv2;

  static ResidualBlock make(int64_t width, Rng& rng);
  Tensor operator()(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct GeneratorOutput {
  Tensor prediction_raw;  // unclamped collapse, used by the losses
  Tensor prediction;      // clamped to [0, 1]
  TranslatedLayers layers;
};

class Generator {
 public:
  /// He-normal hidden layers with an identity start: the second convolution
  /// of every residual block and the branch outputs start at zero, the low
  /// branch's output bias is 1 and the high branch cancels its L3 skip. An
  /// untrained model therefore predicts up2(up2(thermal_lr)).
  Generator(const GeneratorConfig& cfg, Rng& rng);

  const GeneratorConfig& config() const { return cfg_; }

  /// Every weight and bias exactly once, in a stable order. Names are
  /// "<branch>.<layer>.weight|bias" with branch in {ltb, mtb, htb}.
  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
  int64_t parameter_count() const;

  /// guide is N x C x H x W, thermal_lr is N x C x H/4 x W/4, values in
  /// [0, 1]. Throws ShapeError on extent mismatch and NumericError (naming
  /// the branch) on non-finite values.
  GeneratorOutput forward(Tape& tape, const Tensor& guide, const Tensor& thermal_lr) const;

 private:
  Tensor low_branch(Tape& tape, const Tensor& l1) const;
  Tensor mid_branch(Tape& tape, const Tensor& x) const;
  Tensor high_branch(Tape& tape, const Tensor& x) const;

  GeneratorConfig cfg_;
  Conv2d ltb_stem_, ltb_expand_, ltb_reduce_, ltb_out_;
  std::vector<ResidualBlock> ltb_blocks_;
  Conv2d mtb_in_, mtb_out_;
  std::vector<ResidualBlock> mtb_blocks_;
  Conv2d htb_in_, htb_out_;
  std::vector<ResidualBlock> htb_blocks_;
};

/// Patch discriminator: three stride-2 4x4 convolutions (32, 64, 128
/// channels, instance norm on the last two) followed by a 3x3 convolution to
/// a single-channel score map. No output nonlinearity.
class Discriminator {
 public:
  static constexpr int64_t kMinExtent = 16;

  Discriminator(int64_t channels, Rng& rng);

  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
  /// Throws ShapeError if either spatial extent is below kMinExtent.
  Tensor forward(Tape& tape, const Tensor& y) const;

  /// Direct access for tests that need a fixed-output critic.
  Conv2d& layer(int index) { return layers_[static_cast<std::size_t>(index)]; }

 private:
  int64_t channels_;
  std::vector<Conv2d> layers_;
};

/// Closed-form generator weight + bias count (discriminator excluded).
int64_t count_params(const GeneratorConfig& cfg);

struct FlopBreakdown {
  double ltb = 0;
  double mtb = 0;
  double htb = 0;
  double total() const { return ltb + mtb + htb; }
};

/// GFLOPs of the generator's convolutions for one image with the given
/// high-resolution extents: each convolution costs 2 k^2 inC outC outH outW,
/// evaluated at the branch's native resolution (low: HR/4, mid: HR/2,
/// high: HR). Resampling, normalization and activations are not counted.
FlopBreakdown estimate_flops_breakdown(const GeneratorConfig& cfg, int64_t hr_h, int64_t hr_w);
double estimate_flops(const GeneratorConfig& cfg, int64_t hr_h, int64_t hr_w);

}  // namespace lapgsr

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lapgsr/data_io.hpp"
#include "lapgsr/model.hpp"
#include "lapgsr/optim.hpp"
#include "lapgsr/rng.hpp"

namespace lapgsr {

/// wgan is the plain critic loss without gradient penalty (experimental).
enum class GanVariant { kLsgan, kVanilla, kWgan, kHinge };

GanVariant parse_gan_variant(std::string_view name);
std::string_view gan_variant_name(GanVariant variant);

struct PatchSize {
  int64_t width = 40;
  int64_t height = 30;
  friend bool operator==(const PatchSize&, const PatchSize&) = default;
};

struct TrainConfig {
  double lambda = 4500.0;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  int64_t batch = 12;
  int64_t epochs = 30;
  uint64_t seed = 0;
  PatchSize lr_patch;  // low-resolution extents; HR patches are 4x
  double flip_prob = 0.5;
  double shift_limit = 0.0;
  GanVariant gan_variant = GanVariant::kLsgan;
  int64_t checkpoint_every = 1;  // epochs; 0 keeps only best and final
  GeneratorConfig generator;
  GuideMode guide_mode = GuideMode::kGrayscale;
  int64_t threads = 0;  // 0 keeps the OpenMP default

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);

struct LossTerms {
  double l_mse = 0;
  double l_g_adv = 0;
  double l_d = 0;
  double l_total = 0;
};

/// lsgan: 1/2 mean((d - 1)^2); vanilla: mean(softplus(-d));
/// wgan and hinge: -mean(d).
Tensor gan_g_loss(Tape& tape, const Tensor& d_fake, GanVariant variant);

/// lsgan: 1/2 mean((d_real - 1)^2) + 1/2 mean(d_fake^2);
/// vanilla: mean(softplus(-d_real)) + mean(softplus(d_fake));
/// wgan: mean(d_fake) - mean(d_real);
/// hinge: mean(relu(1 - d_real)) + mean(relu(1 + d_fake)).
Tensor gan_d_loss(Tape& tape, const Tensor& d_real, const Tensor& d_fake, GanVariant variant);

/// lambda * l_mse + l_g_adv.
Tensor combined_loss(Tape& tape, const Tensor& l_mse, const Tensor& l_g_adv, double lambda);
double combined_loss(double l_mse, double l_g_adv, double lambda);

struct FlipDecision {
  bool horizontal = false;
  bool vertical = false;
};

FlipDecision draw_flip(Rng& rng, double p);
SamplePair apply_flip(const SamplePair& pair, FlipDecision decision);
/// Draws independent horizontal and vertical decisions with probability p
/// each and applies them to all three images.
SamplePair augment_flip(const SamplePair& pair, Rng& rng, double p);

/// Translates the guide by integer (dx, dy) with |dx| <= limit * W and
/// |dy| <= limit * H, replicating borders. limit = 0 returns a copy without
/// drawing.
Tensor augment_shift(const Tensor& guide, double shift_limit, Rng& rng);

/// Aligned crop: a uniformly placed low-resolution window of `patch` extents
/// and the guide / high-resolution windows at 4x the offset and size.
SamplePair sample_patches(const SamplePair& pair, PatchSize patch, Rng& rng);

/// Stacks N=1 samples into one batch.
SamplePair make_batch(const std::vector<SamplePair>& samples);

struct Optimizers {
  AdamState generator;
  AdamState discriminator;
};

Optimizers make_optimizers(const Generator& generator, const Discriminator& discriminator);

/// One discriminator update on real patches vs detached generator outputs,
/// then one generator update on lambda * MSE + adversarial loss. Throws
/// NumericError naming the first non-finite term.
LossTerms train_step(const SamplePair& batch, Generator& generator, Discriminator& discriminator,
                     Optimizers& optimizers, const TrainConfig& cfg);

struct EpochRecord {
  int64_t epoch = 0;  // 1-based
  int64_t step = 0;   // cumulative optimizer steps
  LossTerms losses;   // means over the epoch's batches
  double val_psnr = 0;
  double val_ssim = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  /// Trainer state manifest written by a previous run.
  std::optional<std::filesystem::path> resume = {};
  std::function<void(const EpochRecord&)> on_epoch = {};
};

struct TrainSummary {
  std::vector<EpochRecord> history;  // epochs run by this call
  double best_val_psnr = 0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
};

inline constexpr std::string_view kMetricLogHeader =
    "epoch,step,l_mse,l_g_adv,l_d,l_total,val_psnr,val_ssim";

/// Runs cfg.epochs epochs over data.train with seeded shuffling and
/// augmentation, validating on data.val after every epoch. Writes
/// out_dir/metrics.csv, out_dir/epoch_NNNN{.json,.state.json} every
/// checkpoint_every epochs and at the end, and out_dir/best.json for the
/// best validation PSNR (the final epoch when val is empty).
TrainSummary train_loop(const DatasetSplit& data, const TrainConfig& cfg,
                        const TrainOptions& options);

}  // namespace lapgsr

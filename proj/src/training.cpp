#include "lapgsr/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "lapgsr/checkpoint.hpp"
#include "lapgsr/error.hpp"
#include "lapgsr/image.hpp"
#include "lapgsr/kernels/kernels.hpp"
#include "lapgsr/metrics.hpp"
#include "lapgsr/ops.hpp"

namespace lapgsr {

namespace fs = std::filesystem;
using nlohmann::json;

GanVariant parse_gan_variant(std::string_view name) {
  if (name == "lsgan") return GanVariant::kLsgan;
  if (name == "vanilla") return GanVariant::kVanilla;
  if (name == "wgan") return GanVariant::kWgan;
  if (name == "hinge") return GanVariant::kHinge;
  throw ConfigError("unknown gan_variant '" + std::string(name) +
                    "' (expected lsgan, vanilla, wgan or hinge)");
}

std::string_view gan_variant_name(GanVariant variant) {
  switch (variant) {
    case GanVariant::kLsgan: return "lsgan";
    case GanVariant::kVanilla: return "vanilla";
    case GanVariant::kWgan: return "wgan";
    case GanVariant::kHinge: return "hinge";
  }
  return "lsgan";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be a finite value >= 0");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) fail("learning rates must be positive");
  if (batch < 1) fail("batch must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (lr_patch.width < 4 || lr_patch.height < 4) fail("lr_patch extents must be >= 4");
  if (4 * lr_patch.width < Discriminator::kMinExtent || 4 * lr_patch.height < Discriminator::kMinExtent) {
    fail("lr_patch is too small for the discriminator");
  }
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) fail("flip_prob must lie in [0, 1]");
  if (!(shift_limit >= 0.0 && shift_limit < 0.5)) fail("shift_limit must lie in [0, 0.5)");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (threads < 0) fail("threads must be >= 0");
  const int64_t expected_channels = guide_mode == GuideMode::kGrayscale ? 1 : 3;
  if (generator.channels != expected_channels) {
    fail("generator.channels = " + std::to_string(generator.channels) + " does not match guide_mode " +
         std::string(guide_mode_name(guide_mode)));
  }
  generator.validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lambda", c.lambda},
           {"lr_g", c.lr_g},
           {"lr_d", c.lr_d},
           {"batch", c.batch},
           {"epochs", c.epochs},
           {"seed", c.seed},
           {"lr_patch", {{"width", c.lr_patch.width}, {"height", c.lr_patch.height}}},
           {"flip_prob", c.flip_prob},
           {"shift_limit", c.shift_limit},
           {"gan_variant", gan_variant_name(c.gan_variant)},
           {"checkpoint_every", c.checkpoint_every},
           {"generator", c.generator},
           {"guide_mode", guide_mode_name(c.guide_mode)},
           {"threads", c.threads}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::set<std::string> kKeys{
      "lambda",      "lr_g",        "lr_d",      "batch",            "epochs",
      "seed",        "lr_patch",    "flip_prob", "shift_limit",      "gan_variant",
      "checkpoint_every", "generator", "guide_mode", "threads"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("train config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("lr_g")) c.lr_g = j.at("lr_g").get<double>();
    if (j.contains("lr_d")) c.lr_d = j.at("lr_d").get<double>();
    if (j.contains("batch")) c.batch = j.at("batch").get<int64_t>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int64_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("lr_patch")) {
      const json& p = j.at("lr_patch");
      for (const auto& [key, _] : p.items()) {
        if (key != "width" && key != "height") {
          throw ConfigError("train config: unknown key 'lr_patch." + key + "'");
        }
      }
      if (p.contains("width")) c.lr_patch.width = p.at("width").get<int64_t>();
      if (p.contains("height")) c.lr_patch.height = p.at("height").get<int64_t>();
    }
    if (j.contains("flip_prob")) c.flip_prob = j.at("flip_prob").get<double>();
    if (j.contains("shift_limit")) c.shift_limit = j.at("shift_limit").get<double>();
    if (j.contains("gan_variant")) c.gan_variant = parse_gan_variant(j.at("gan_variant").get<std::string>());
    if (j.contains("checkpoint_every")) c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
    if (j.contains("generator")) j.at("generator").get_to(c.generator);
    if (j.contains("guide_mode")) c.guide_mode = parse_guide_mode(j.at("guide_mode").get<std::string>());
    if (j.contains("threads")) c.threads = j.at("threads").get<int64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  TrainConfig cfg = j.get<TrainConfig>();
  cfg.validate();
  return cfg;
}

Tensor gan_g_loss(Tape& tape, const Tensor& d_fake, GanVariant variant) {
  switch (variant) {
    case GanVariant::kLsgan:
      return affine(tape, mean(tape, square(tape, affine(tape, d_fake, 1.0f, -1.0f))), 0.5f, 0.0f);
    case GanVariant::kVanilla:
      return mean(tape, softplus(tape, affine(tape, d_fake, -1.0f, 0.0f)));
    case GanVariant::kWgan:
    case GanVariant::kHinge:
      return affine(tape, mean(tape, d_fake), -1.0f, 0.0f);
  }
  throw ConfigError("unknown gan variant");
}

Tensor gan_d_loss(Tape& tape, const Tensor& d_real, const Tensor& d_fake, GanVariant variant) {
  switch (variant) {
    case GanVariant::kLsgan: {
      Tensor real = mean(tape, square(tape, affine(tape, d_real, 1.0f, -1.0f)));
      Tensor fake = mean(tape, square(tape, d_fake));
      return affine(tape, add(tape, real, fake), 0.5f, 0.0f);
    }
    case GanVariant::kVanilla:
      return add(tape, mean(tape, softplus(tape, affine(tape, d_real, -1.0f, 0.0f))),
                 mean(tape, softplus(tape, d_fake)));
    case GanVariant::kWgan:
      return sub(tape, mean(tape, d_fake), mean(tape, d_real));
    case GanVariant::kHinge:
      return add(tape, mean(tape, relu(tape, affine(tape, d_real, -1.0f, 1.0f))),
                 mean(tape, relu(tape, affine(tape, d_fake, 1.0f, 1.0f))));
  }
  throw ConfigError("unknown gan variant");
}

Tensor combined_loss(Tape& tape, const Tensor& l_mse, const Tensor& l_g_adv, double lambda) {
  return add(tape, affine(tape, l_mse, static_cast<float>(lambda), 0.0f), l_g_adv);
}

double combined_loss(double l_mse, double l_g_adv, double lambda) { return lambda * l_mse + l_g_adv; }

FlipDecision draw_flip(Rng& rng, double p) {
  FlipDecision d;
  d.horizontal = rng.bernoulli(p);
  d.vertical = rng.bernoulli(p);
  return d;
}

SamplePair apply_flip(const SamplePair& pair, FlipDecision decision) {
  auto flip = [&](const Tensor& t) {
    Tensor out = decision.horizontal ? image::flip_horizontal(t) : t.detach();
    return decision.vertical ? image::flip_vertical(out) : out;
  };
  return SamplePair{pair.id, flip(pair.guide), flip(pair.thermal_lr), flip(pair.thermal_hr)};
}

SamplePair augment_flip(const SamplePair& pair, Rng& rng, double p) {
  return apply_flip(pair, draw_flip(rng, p));
}

Tensor augment_shift(const Tensor& guide, double shift_limit, Rng& rng) {
  if (!(shift_limit >= 0.0 && shift_limit < 0.5)) {
    throw ConfigError("shift_limit must lie in [0, 0.5)");
  }
  if (shift_limit == 0.0) return guide.detach();
  const Shape& s = guide.shape();
  const double lx = shift_limit * static_cast<double>(s.w);
  const double ly = shift_limit * static_cast<double>(s.h);
  const auto dx = static_cast<int64_t>(std::lround(rng.uniform(-lx, lx)));
  const auto dy = static_cast<int64_t>(std::lround(rng.uniform(-ly, ly)));
  return image::translate(guide, dx, dy);
}

SamplePair sample_patches(const SamplePair& pair, PatchSize patch, Rng& rng) {
  const Shape& lr = pair.thermal_lr.shape();
  if (lr.w < patch.width || lr.h < patch.height) {
    throw ShapeError("sample '" + pair.id + "': thermal_lr " + std::to_string(lr.w) + "x" +
                     std::to_string(lr.h) + " is smaller than the " + std::to_string(patch.width) +
                     "x" + std::to_string(patch.height) + " patch");
  }
  const int64_t x0 = rng.uniform_int(0, lr.w - patch.width);
  const int64_t y0 = rng.uniform_int(0, lr.h - patch.height);
  SamplePair out;
  out.id = pair.id;
  out.thermal_lr = image::crop(pair.thermal_lr, y0, x0, patch.height, patch.width);
  out.guide = image::crop(pair.guide, 4 * y0, 4 * x0, 4 * patch.height, 4 * patch.width);
  out.thermal_hr = image::crop(pair.thermal_hr, 4 * y0, 4 * x0, 4 * patch.height, 4 * patch.width);
  return out;
}

SamplePair make_batch(const std::vector<SamplePair>& samples) {
  std::vector<Tensor> guides, lrs, hrs;
  for (const SamplePair& s : samples) {
    guides.push_back(s.guide);
    lrs.push_back(s.thermal_lr);
    hrs.push_back(s.thermal_hr);
  }
  return SamplePair{"batch", image::stack(guides), image::stack(lrs), image::stack(hrs)};
}

Optimizers make_optimizers(const Generator& generator, const Discriminator& discriminator) {
  const auto gp = generator.parameters();
  const auto dp = discriminator.parameters();
  return Optimizers{make_adam_state(gp), make_adam_state(dp)};
}

namespace {

double checked(const Tensor& t, const char* name) {
  const double v = t.item();
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + name);
  return v;
}

void set_trainable(std::vector<Tensor>& params, bool value) {
  for (Tensor& p : params) {
    p.set_requires_grad(value);
  }
}

}  // namespace

LossTerms train_step(const SamplePair& batch, Generator& generator, Discriminator& discriminator,
                     Optimizers& optimizers, const TrainConfig& cfg) {
  auto g_params = generator.parameters();
  auto d_params = discriminator.parameters();
  for (Tensor& p : g_params) p.zero_grad();
  for (Tensor& p : d_params) p.zero_grad();

  Tape g_tape;
  const GeneratorOutput out = generator.forward(g_tape, batch.guide, batch.thermal_lr);
  const Tensor& fake = out.prediction_raw;

  LossTerms terms;
  {
    Tape d_tape;
    const Tensor d_real = discriminator.forward(d_tape, batch.thermal_hr);
    const Tensor d_fake = discriminator.forward(d_tape, fake.detach());
    const Tensor l_d = gan_d_loss(d_tape, d_real, d_fake, cfg.gan_variant);
    terms.l_d = checked(l_d, "l_d");
    d_tape.backward(l_d);
    adam_step(d_params, optimizers.discriminator, AdamOptions{.lr = static_cast<float>(cfg.lr_d)});
  }

  set_trainable(d_params, false);
  try {
    const Tensor d_fake = discriminator.forward(g_tape, fake);
    const Tensor l_adv = gan_g_loss(g_tape, d_fake, cfg.gan_variant);
    const Tensor l_mse = mse(g_tape, fake, batch.thermal_hr);
    const Tensor total = combined_loss(g_tape, l_mse, l_adv, cfg.lambda);
    terms.l_mse = checked(l_mse, "l_mse");
    terms.l_g_adv = checked(l_adv, "l_g_adv");
    terms.l_total = checked(total, "l_total");
    g_tape.backward(total);
  } catch (...) {
    set_trainable(d_params, true);
    throw;
  }
  set_trainable(d_params, true);
  adam_step(g_params, optimizers.generator, AdamOptions{.lr = static_cast<float>(cfg.lr_g)});
  return terms;
}

namespace {

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string log_row(const EpochRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << r.step << ',' << format_value(r.losses.l_mse) << ','
     << format_value(r.losses.l_g_adv) << ',' << format_value(r.losses.l_d) << ','
     << format_value(r.losses.l_total) << ',' << format_value(r.val_psnr) << ','
     << format_value(r.val_ssim);
  return os.str();
}

NamedTensors adam_tensors(const std::string& prefix, const AdamState& state) {
  NamedTensors out;
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    const auto len = static_cast<int64_t>(state.m[i].size());
    out.emplace_back(prefix + ".m." + std::to_string(i), Tensor(Shape{1, 1, 1, len}, state.m[i]));
    out.emplace_back(prefix + ".v." + std::to_string(i), Tensor(Shape{1, 1, 1, len}, state.v[i]));
  }
  return out;
}

void restore_adam(const std::string& prefix, AdamState& state, const NamedTensors& source) {
  const NamedTensors target = adam_tensors(prefix, state);
  std::vector<std::pair<std::string, Tensor>> filtered;
  for (const auto& entry : source) {
    if (entry.first.rfind(prefix + ".", 0) == 0) filtered.push_back(entry);
  }
  assign_tensors(target, filtered, "optimizer state");
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    const auto m = target[2 * i].second.data();
    const auto v = target[2 * i + 1].second.data();
    state.m[i].assign(m.begin(), m.end());
    state.v[i].assign(v.begin(), v.end());
  }
}

NamedTensors prefixed(const std::string& prefix, const NamedTensors& tensors) {
  NamedTensors out;
  for (const auto& [name, t] : tensors) out.emplace_back(prefix + name, t);
  return out;
}

struct Trainer {
  const DatasetSplit& data;
  TrainConfig cfg;
  Rng rng;
  Generator generator;
  Discriminator discriminator;
  Optimizers optimizers;
  int64_t epoch = 0;
  int64_t step = 0;
  double best_psnr = -std::numeric_limits<double>::infinity();

  Trainer(const DatasetSplit& d, const TrainConfig& c, Rng init)
      : data(d),
        cfg(c),
        rng(std::move(init)),
        generator(c.generator, rng),
        discriminator(c.generator.channels, rng),
        optimizers(make_optimizers(generator, discriminator)) {}

  void save_state(const fs::path& manifest) const {
    NamedTensors tensors = prefixed("gen.", generator.named_parameters());
    for (auto& t : prefixed("", discriminator.named_parameters())) tensors.push_back(t);
    for (auto& t : adam_tensors("adam_g", optimizers.generator)) tensors.push_back(t);
    for (auto& t : adam_tensors("adam_d", optimizers.discriminator)) tensors.push_back(t);
    const json meta{{"kind", "trainer-state"},
                    {"epoch", epoch},
                    {"step", step},
                    {"adam_g_t", optimizers.generator.t},
                    {"adam_d_t", optimizers.discriminator.t},
                    {"best_val_psnr", std::isfinite(best_psnr) ? json(best_psnr) : json(nullptr)},
                    {"rng", rng.state()},
                    {"config", cfg}};
    write_bundle(manifest, tensors, meta);
  }

  void load_state(const fs::path& manifest) {
    const TensorBundle bundle = read_bundle(manifest);
    const json& meta = bundle.meta;
    if (meta.value("kind", "") != "trainer-state") {
      throw IoError(manifest.string() + " is not a trainer state checkpoint");
    }
    TrainConfig saved = meta.at("config").get<TrainConfig>();
    if (!(saved.generator == cfg.generator) || saved.seed != cfg.seed ||
        saved.guide_mode != cfg.guide_mode) {
      throw ConfigError("resume: checkpoint " + manifest.string() +
                        " was written with a different generator, seed or guide mode");
    }
    NamedTensors model_part;
    for (const auto& entry : bundle.tensors) {
      if (entry.first.rfind("adam_", 0) != 0) model_part.push_back(entry);
    }
    NamedTensors target = prefixed("gen.", generator.named_parameters());
    for (auto& t : discriminator.named_parameters()) target.push_back(t);
    assign_tensors(target, model_part, "trainer state");
    restore_adam("adam_g", optimizers.generator, bundle.tensors);
    restore_adam("adam_d", optimizers.discriminator, bundle.tensors);
    optimizers.generator.t = meta.at("adam_g_t").get<int64_t>();
    optimizers.discriminator.t = meta.at("adam_d_t").get<int64_t>();
    epoch = meta.at("epoch").get<int64_t>();
    step = meta.at("step").get<int64_t>();
    best_psnr = meta.at("best_val_psnr").is_null() ? -std::numeric_limits<double>::infinity()
                                                   : meta.at("best_val_psnr").get<double>();
    rng.restore(meta.at("rng").get<std::string>());
  }

  EpochRecord run_epoch() {
    const auto& train = data.train;
    const auto order = rng.permutation(static_cast<int64_t>(train.size()));
    LossTerms sums;
    int64_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<SamplePair> patches;
      for (std::size_t i = start; i < stop; ++i) {
        const SamplePair& src = train[static_cast<std::size_t>(order[i])];
        SamplePair shifted{src.id, augment_shift(src.guide, cfg.shift_limit, rng), src.thermal_lr,
                           src.thermal_hr};
        patches.push_back(augment_flip(sample_patches(shifted, cfg.lr_patch, rng), rng, cfg.flip_prob));
      }
      const LossTerms t = train_step(make_batch(patches), generator, discriminator, optimizers, cfg);
      sums.l_mse += t.l_mse;
      sums.l_g_adv += t.l_g_adv;
      sums.l_d += t.l_d;
      sums.l_total += t.l_total;
      ++batches;
      ++step;
    }
    ++epoch;
    EpochRecord record;
    record.epoch = epoch;
    record.step = step;
    const auto denom = static_cast<double>(std::max<int64_t>(batches, 1));
    record.losses = LossTerms{sums.l_mse / denom, sums.l_g_adv / denom, sums.l_d / denom,
                              sums.l_total / denom};
    if (data.val.empty()) {
      record.val_psnr = std::numeric_limits<double>::quiet_NaN();
      record.val_ssim = std::numeric_limits<double>::quiet_NaN();
    } else {
      const EvalReport report = evaluate(GeneratorResolver(generator), data.val, "val");
      record.val_psnr = report.mean_psnr;
      record.val_ssim = report.mean_ssim;
    }
    return record;
  }
};

std::string epoch_stem(int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%04lld", static_cast<long long>(epoch));
  return buf;
}

// Keeps the header and rows for epochs <= last_epoch.
void truncate_log(const fs::path& path, int64_t last_epoch) {
  std::vector<std::string> kept;
  {
    std::ifstream in(path);
    if (!in) throw IoError("resume: cannot read metric log " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kMetricLogHeader) throw IoError("resume: unexpected header in " + path.string());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) <= last_epoch) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  out << kMetricLogHeader << '\n';
  for (const auto& row : kept) out << row << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

TrainSummary train_loop(const DatasetSplit& data, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("train_loop: the train split is empty");
  const int64_t channels = data.train.front().thermal_hr.shape().c;
  if (channels != cfg.generator.channels) {
    throw ConfigError("train_loop: data has " + std::to_string(channels) +
                      " channels but generator.channels = " + std::to_string(cfg.generator.channels));
  }
  if (cfg.threads > 0) kernels::set_num_threads(static_cast<int>(cfg.threads));

  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec || !fs::is_directory(options.out_dir)) {
    throw IoError("cannot create output directory " + options.out_dir.string());
  }

  Trainer trainer(data, cfg, Rng(cfg.seed));
  const fs::path log_path = options.out_dir / "metrics.csv";
  TrainSummary summary;
  if (options.resume) {
    trainer.load_state(*options.resume);
    truncate_log(log_path, trainer.epoch);
    summary.best_val_psnr = trainer.best_psnr;
    if (fs::exists(options.out_dir / "best.json")) summary.best_checkpoint = options.out_dir / "best.json";
  } else {
    std::ofstream log(log_path, std::ios::trunc);
    log << kMetricLogHeader << '\n';
    if (!log) throw IoError("cannot write " + log_path.string());
  }

  while (trainer.epoch < cfg.epochs) {
    const EpochRecord record = trainer.run_epoch();
    {
      std::ofstream log(log_path, std::ios::app);
      log << log_row(record) << '\n';
      if (!log) throw IoError("cannot append to " + log_path.string());
    }
    const json meta{{"epoch", record.epoch}, {"step", record.step}, {"train_config", cfg}};
    const double score = data.val.empty() ? static_cast<double>(record.epoch) : record.val_psnr;
    if (!std::isnan(score) && score > trainer.best_psnr) {
      trainer.best_psnr = score;
      summary.best_checkpoint = options.out_dir / "best.json";
      save_generator(summary.best_checkpoint, trainer.generator, meta);
    }
    const bool periodic = cfg.checkpoint_every > 0 && record.epoch % cfg.checkpoint_every == 0;
    if (periodic || record.epoch == cfg.epochs) {
      const fs::path stem = options.out_dir / epoch_stem(record.epoch);
      save_generator(fs::path(stem.string() + ".json"), trainer.generator, meta);
      trainer.save_state(fs::path(stem.string() + ".state.json"));
      summary.last_checkpoint = fs::path(stem.string() + ".json");
    }
    summary.history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }
  summary.best_val_psnr = trainer.best_psnr;
  return summary;
}

}  // namespace lapgsr

#include <cmath>

#include "lapgsr/error.hpp"
#include "lapgsr/image.hpp"
#include "lapgsr/training.hpp"
#include "support.hpp"

namespace lapgsr {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;
using testing::read_file;
using testing::TempDir;

Tensor filled(float v, const Shape& s = Shape{1, 1, 3, 5}) { return Tensor(s, v); }

GeneratorConfig tiny_generator() {
  GeneratorConfig cfg;
  cfg.blocks_ltb = cfg.blocks_mtb = cfg.blocks_htb = 1;
  cfg.width_ltb = cfg.width_mtb = 8;
  cfg.width_htb = 4;
  cfg.stem_ltb = 4;
  return cfg;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.generator = tiny_generator();
  cfg.batch = 4;
  cfg.epochs = 2;
  cfg.seed = 11;
  cfg.lr_patch = PatchSize{8, 6};
  cfg.lr_g = cfg.lr_d = 1e-3;
  return cfg;
}

// Smooth scene: guide and thermal share one edge layout.
SamplePair scene(const std::string& id, int64_t h, int64_t w, Rng& rng) {
  Tensor hr(Shape{1, 1, h, w});
  Tensor guide(Shape{1, 1, h, w});
  const double cx = rng.uniform(0.3, 0.7) * static_cast<double>(w);
  const double cy = rng.uniform(0.3, 0.7) * static_cast<double>(h);
  const double r = rng.uniform(0.15, 0.3) * static_cast<double>(std::min(h, w));
  const float hot = static_cast<float>(rng.uniform(0.6, 0.9));
  const float shade = static_cast<float>(rng.uniform(0.1, 0.9));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const bool inside = std::hypot(x + 0.5 - cx, y + 0.5 - cy) < r;
      hr.at(0, 0, y, x) = inside ? hot : 0.2f;
      guide.at(0, 0, y, x) = inside ? shade : 0.5f;
    }
  }
  Tape tape(Tape::Mode::kInference);
  return SamplePair{id, guide, resize(tape, hr, h / 4, w / 4, true), hr};
}

DatasetSplit scene_split(int64_t n_train, int64_t n_val, uint64_t seed) {
  Rng rng(seed);
  DatasetSplit d;
  for (int64_t i = 0; i < n_train; ++i) d.train.push_back(scene("t" + std::to_string(i), 32, 48, rng));
  for (int64_t i = 0; i < n_val; ++i) d.val.push_back(scene("v" + std::to_string(i), 32, 48, rng));
  return d;
}

std::vector<std::vector<float>> grads_of(const std::vector<Tensor>& params) {
  std::vector<std::vector<float>> out;
  for (const Tensor& p : params) {
    if (p.has_grad()) {
      out.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      out.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    }
  }
  return out;
}

double cosine(const std::vector<std::vector<float>>& a, const std::vector<std::vector<float>>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      dot += static_cast<double>(a[i][k]) * b[i][k];
      na += static_cast<double>(a[i][k]) * a[i][k];
      nb += static_cast<double>(b[i][k]) * b[i][k];
    }
  }
  return dot / std::sqrt(na * nb);
}

void randomize(const NamedTensors& params, Rng& rng, double scale) {
  for (const auto& [name, t] : params) {
    Tensor p = t;
    for (float& v : p.data()) v = static_cast<float>(scale * rng.normal());
  }
}

TEST(Losses, LsganClosedForms) {
  Tape tape(Tape::Mode::kInference);
  EXPECT_FLOAT_EQ(gan_g_loss(tape, filled(1), GanVariant::kLsgan).item(), 0.0f);
  EXPECT_FLOAT_EQ(gan_g_loss(tape, filled(0), GanVariant::kLsgan).item(), 0.5f);
  EXPECT_FLOAT_EQ(gan_g_loss(tape, filled(-1), GanVariant::kLsgan).item(), 2.0f);
  EXPECT_FLOAT_EQ(gan_d_loss(tape, filled(1), filled(0), GanVariant::kLsgan).item(), 0.0f);
  EXPECT_FLOAT_EQ(gan_d_loss(tape, filled(0), filled(1), GanVariant::kLsgan).item(), 1.0f);
  EXPECT_FLOAT_EQ(gan_d_loss(tape, filled(0.5f), filled(0.5f), GanVariant::kLsgan).item(), 0.25f);
}

TEST(Losses, OtherVariants) {
  Tape tape(Tape::Mode::kInference);
  EXPECT_NEAR(gan_g_loss(tape, filled(0), GanVariant::kVanilla).item(), std::log(2.0), 1e-6);
  EXPECT_NEAR(gan_d_loss(tape, filled(0), filled(0), GanVariant::kVanilla).item(), 2 * std::log(2.0), 1e-6);
  EXPECT_FLOAT_EQ(gan_g_loss(tape, filled(0.3f), GanVariant::kWgan).item(), -0.3f);
  EXPECT_FLOAT_EQ(gan_d_loss(tape, filled(0.5f), filled(0.2f), GanVariant::kWgan).item(), -0.3f);
  EXPECT_FLOAT_EQ(gan_g_loss(tape, filled(0.3f), GanVariant::kHinge).item(), -0.3f);
  EXPECT_FLOAT_EQ(gan_d_loss(tape, filled(2), filled(-2), GanVariant::kHinge).item(), 0.0f);
  EXPECT_FLOAT_EQ(gan_d_loss(tape, filled(0), filled(0), GanVariant::kHinge).item(), 2.0f);
  for (const char* name : {"lsgan", "vanilla", "wgan", "hinge"}) {
    EXPECT_EQ(gan_variant_name(parse_gan_variant(name)), name);
  }
  EXPECT_THROW(parse_gan_variant("wgan-gp"), ConfigError);
}

TEST(Losses, LsganGeneratorGradient) {
  Tensor d(Shape{1, 1, 2, 2}, std::vector<float>{0.0f, 1.0f, 2.0f, -1.0f});
  d.set_requires_grad(true);
  Tape tape;
  tape.backward(gan_g_loss(tape, d, GanVariant::kLsgan));
  for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(d.grad()[i], (d.data()[i] - 1.0f) / 4.0f);
}

TEST(Losses, CombinedArithmetic) {
  EXPECT_DOUBLE_EQ(combined_loss(0.001, 0.5, 0.0), 0.5);
  EXPECT_NEAR(combined_loss(0.001, 0.5, 4500.0), 5.0, 1e-12);
  EXPECT_NEAR(combined_loss(0.001, 0.5, 1500.0), 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(combined_loss(0.0, 0.0, 4500.0), 0.0);
  Tape tape(Tape::Mode::kInference);
  EXPECT_NEAR(combined_loss(tape, Tensor::scalar(0.001f), Tensor::scalar(0.5f), 4500.0).item(), 5.0, 1e-5);
}

TEST(Losses, CombinedMonotoneInLambda) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const double mse = rng.uniform(1e-6, 1.0), adv = rng.uniform(-1.0, 1.0);
    const double l1 = rng.uniform(0.0, 5000.0), l2 = l1 + rng.uniform(1e-3, 5000.0);
    EXPECT_LT(combined_loss(mse, adv, l1), combined_loss(mse, adv, l2));
  }
}

TEST(Flip, FrequencyAndIndependence) {
  Rng rng(2);
  int h = 0, v = 0, both = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const FlipDecision d = draw_flip(rng, 0.5);
    h += d.horizontal;
    v += d.vertical;
    both += d.horizontal && d.vertical;
  }
  EXPECT_GE(h / double(n), 0.48);
  EXPECT_LE(h / double(n), 0.52);
  EXPECT_GE(v / double(n), 0.48);
  EXPECT_LE(v / double(n), 0.52);
  EXPECT_NEAR(both / double(n), 0.25, 0.02);
}

TEST(Flip, IdentityInvolutionAndSharedDecision) {
  Rng rng(3);
  const SamplePair p = scene("s", 16, 24, rng);
  const SamplePair same = augment_flip(p, rng, 0.0);
  EXPECT_EQ(max_abs_diff(same.guide.data(), p.guide.data()), 0.0);
  EXPECT_EQ(max_abs_diff(same.thermal_hr.data(), p.thermal_hr.data()), 0.0);

  for (FlipDecision d : {FlipDecision{true, false}, FlipDecision{false, true}, FlipDecision{true, true}}) {
    const SamplePair once = apply_flip(p, d);
    const SamplePair twice = apply_flip(once, d);
    EXPECT_EQ(max_abs_diff(twice.guide.data(), p.guide.data()), 0.0);
    EXPECT_EQ(max_abs_diff(twice.thermal_lr.data(), p.thermal_lr.data()), 0.0);
    EXPECT_EQ(max_abs_diff(twice.thermal_hr.data(), p.thermal_hr.data()), 0.0);
    const int64_t w = p.guide.shape().w, h = p.guide.shape().h;
    const int64_t lw = p.thermal_lr.shape().w, lh = p.thermal_lr.shape().h;
    for (auto [y, x] : std::vector<std::pair<int64_t, int64_t>>{{0, 0}, {2, 3}, {3, 5}}) {
      const int64_t fy = d.vertical ? h - 1 - y : y, fx = d.horizontal ? w - 1 - x : x;
      EXPECT_EQ(once.guide.at(0, 0, y, x), p.guide.at(0, 0, fy, fx));
      EXPECT_EQ(once.thermal_hr.at(0, 0, y, x), p.thermal_hr.at(0, 0, fy, fx));
      const int64_t ly = d.vertical ? lh - 1 - y : y, lx = d.horizontal ? lw - 1 - x : x;
      EXPECT_EQ(once.thermal_lr.at(0, 0, y, x), p.thermal_lr.at(0, 0, ly, lx));
    }
  }
}

TEST(Shift, ZeroLimitIsIdentityWithoutDraws) {
  Rng rng(4);
  const Tensor g = random_tensor(Shape{1, 1, 24, 32}, rng);
  const uint64_t before = rng.counter();
  const Tensor out = augment_shift(g, 0.0, rng);
  EXPECT_EQ(rng.counter(), before);
  EXPECT_EQ(max_abs_diff(out.data(), g.data()), 0.0);
  EXPECT_THROW(augment_shift(g, 0.5, rng), ConfigError);
  EXPECT_THROW(augment_shift(g, -0.1, rng), ConfigError);
}

// Locates the translation by tracking a unique marker pixel.
std::pair<int64_t, int64_t> find_marker(const Tensor& t) {
  for (int64_t y = 0; y < t.shape().h; ++y) {
    for (int64_t x = 0; x < t.shape().w; ++x) {
      if (t.at(0, 0, y, x) == 1.0f) return {x, y};
    }
  }
  return {-1000, -1000};
}

TEST(Shift, BoundsAndInteriorMatch) {
  Rng rng(5);
  const int64_t h = 240, w = 320;
  Tensor g(Shape{1, 1, h, w});
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) g.at(0, 0, y, x) = static_cast<float>((y * w + x) % 997) / 1000.0f;
  }
  g.at(0, 0, h / 2, w / 2) = 1.0f;
  int64_t max_dx = 0, max_dy = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Tensor s = augment_shift(g, 0.1, rng);
    const auto [mx, my] = find_marker(s);
    const int64_t dx = mx - w / 2, dy = my - h / 2;
    ASSERT_LE(std::abs(dx), 32);
    ASSERT_LE(std::abs(dy), 24);
    max_dx = std::max(max_dx, std::abs(dx));
    max_dy = std::max(max_dy, std::abs(dy));
    // Undo the shift; only the border band may differ.
    const Tensor back = image::translate(s, -dx, -dy);
    for (int64_t y = std::abs(dy); y < h - std::abs(dy); ++y) {
      for (int64_t x = std::abs(dx); x < w - std::abs(dx); ++x) {
        ASSERT_EQ(back.at(0, 0, y, x), g.at(0, 0, y, x)) << dx << "," << dy;
      }
    }
  }
  EXPECT_GT(max_dx, 20);
  EXPECT_GT(max_dy, 15);
}

TEST(Patches, AlignedWindows) {
  const int64_t lh = 45, lw = 60;
  Tensor lr(Shape{1, 1, lh, lw});
  Tensor hr(Shape{1, 1, 4 * lh, 4 * lw});
  for (int64_t y = 0; y < 4 * lh; ++y) {
    for (int64_t x = 0; x < 4 * lw; ++x) hr.at(0, 0, y, x) = static_cast<float>(y * 1000 + x);
  }
  for (int64_t y = 0; y < lh; ++y) {
    for (int64_t x = 0; x < lw; ++x) lr.at(0, 0, y, x) = hr.at(0, 0, 4 * y, 4 * x);
  }
  const SamplePair pair{"coded", hr, lr, hr};
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const SamplePair p = sample_patches(pair, PatchSize{40, 30}, rng);
    ASSERT_EQ(p.thermal_lr.shape(), (Shape{1, 1, 30, 40}));
    ASSERT_EQ(p.thermal_hr.shape(), (Shape{1, 1, 120, 160}));
    ASSERT_EQ(p.guide.shape(), (Shape{1, 1, 120, 160}));
    const float origin = p.thermal_lr.at(0, 0, 0, 0);
    const auto y0 = static_cast<int64_t>(origin) / 1000, x0 = static_cast<int64_t>(origin) % 1000;
    ASSERT_EQ(y0 % 4, 0);
    ASSERT_EQ(x0 % 4, 0);
    for (int64_t y = 0; y < 120; y += 7) {
      for (int64_t x = 0; x < 160; x += 9) {
        ASSERT_EQ(p.thermal_hr.at(0, 0, y, x), hr.at(0, 0, y0 + y, x0 + x));
        ASSERT_EQ(p.guide.at(0, 0, y, x), hr.at(0, 0, y0 + y, x0 + x));
      }
    }
  }
}

TEST(Patches, FullImageAndTooSmall) {
  Rng rng(7);
  const SamplePair p = scene("exact", 120, 160, rng);
  const SamplePair q = sample_patches(p, PatchSize{40, 30}, rng);
  EXPECT_EQ(max_abs_diff(q.thermal_hr.data(), p.thermal_hr.data()), 0.0);
  try {
    sample_patches(scene("small-one", 96, 160, rng), PatchSize{40, 30}, rng);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("small-one"), std::string::npos);
  }
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig cfg = tiny_train_config();
  cfg.gan_variant = GanVariant::kHinge;
  cfg.shift_limit = 0.1;
  const nlohmann::json j = cfg;
  const TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_NO_THROW(back.validate());

  nlohmann::json bad = j;
  bad["momentum"] = 0.9;
  EXPECT_THROW(bad.get<TrainConfig>(), ConfigError);
  TrainConfig c = cfg;
  c.shift_limit = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = cfg;
  c.lambda = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = cfg;
  c.guide_mode = GuideMode::kColor;
  EXPECT_THROW(c.validate(), ConfigError);
  c = cfg;
  c.lr_patch = PatchSize{3, 30};
  EXPECT_THROW(c.validate(), ConfigError);
}

struct StepFixture {
  Rng rng{21};
  Generator generator{tiny_generator(), rng};
  Discriminator discriminator{1, rng};
  SamplePair batch;

  StepFixture() {
    Rng data(22);
    std::vector<SamplePair> items;
    for (int i = 0; i < 3; ++i) items.push_back(scene("b" + std::to_string(i), 32, 40, data));
    batch = make_batch(items);
  }
};

TEST(TrainStep, HugeLambdaFollowsMseGradient) {
  StepFixture f;
  Rng rng(23);
  randomize(f.generator.named_parameters(), rng, 0.2);
  TrainConfig cfg = tiny_train_config();
  cfg.lambda = 1e9;
  auto params = f.generator.parameters();

  auto gradient = [&](bool adversarial) {
    for (Tensor& p : params) p.zero_grad();
    for (Tensor& p : f.discriminator.parameters()) p.set_requires_grad(false);
    Tape tape;
    const Tensor fake = f.generator.forward(tape, f.batch.guide, f.batch.thermal_lr).prediction_raw;
    const Tensor l_mse = mse(tape, fake, f.batch.thermal_hr);
    const Tensor loss = adversarial
                            ? combined_loss(tape, l_mse, gan_g_loss(tape, f.discriminator.forward(tape, fake),
                                                                    GanVariant::kLsgan),
                                            cfg.lambda)
                            : l_mse;
    tape.backward(loss);
    for (Tensor& p : f.discriminator.parameters()) p.set_requires_grad(true);
    return grads_of(params);
  };
  EXPECT_GT(cosine(gradient(true), gradient(false)), 0.999);
}

TEST(TrainStep, ConstantOneCriticGivesNoAdversarialGradient) {
  StepFixture f;
  Rng rng(24);
  randomize(f.generator.named_parameters(), rng, 0.2);
  Conv2d& last = f.discriminator.layer(3);
  Tensor w = last.weight, b = last.bias;
  std::ranges::fill(w.data(), 0.0f);
  std::ranges::fill(b.data(), 1.0f);
  for (Tensor& p : f.discriminator.parameters()) p.set_requires_grad(false);

  auto params = f.generator.parameters();
  Tape tape;
  const Tensor fake = f.generator.forward(tape, f.batch.guide, f.batch.thermal_lr).prediction_raw;
  const Tensor adv = gan_g_loss(tape, f.discriminator.forward(tape, fake), GanVariant::kLsgan);
  EXPECT_EQ(adv.item(), 0.0f);
  tape.backward(adv);
  for (const auto& g : grads_of(params)) {
    for (float v : g) ASSERT_EQ(v, 0.0f);
  }
}

TEST(TrainStep, UpdatesAreSeparated) {
  // Each network's gradient must match a hand computation that only
  // involves its own loss: D from the pre-step generator output, G against
  // the post-step discriminator.
  StepFixture f;
  StepFixture before;
  TrainConfig cfg = tiny_train_config();
  Optimizers opt = make_optimizers(f.generator, f.discriminator);
  const LossTerms terms = train_step(f.batch, f.generator, f.discriminator, opt, cfg);
  EXPECT_EQ(opt.generator.t, 1);
  EXPECT_EQ(opt.discriminator.t, 1);

  {
    // D grads are cleared when D is frozen for the G step, so compare the
    // Adam update they drive instead.
    Tape tape;
    Tape inference(Tape::Mode::kInference);
    const Tensor fake = before.generator.forward(inference, before.batch.guide, before.batch.thermal_lr)
                            .prediction_raw;
    const Tensor l_d = gan_d_loss(tape, before.discriminator.forward(tape, before.batch.thermal_hr),
                                  before.discriminator.forward(tape, fake), cfg.gan_variant);
    EXPECT_NEAR(l_d.item(), terms.l_d, 1e-6);
    tape.backward(l_d);
    auto d_old = before.discriminator.parameters();
    AdamState state = make_adam_state(d_old);
    adam_step(d_old, state, AdamOptions{.lr = static_cast<float>(cfg.lr_d)});
    const auto d_now = f.discriminator.parameters();
    for (std::size_t i = 0; i < d_now.size(); ++i) {
      EXPECT_LT(max_abs_diff(d_old[i].data(), d_now[i].data()), 1e-7) << d_now[i].numel();
      EXPECT_FALSE(d_now[i].has_grad());
    }
  }
  {
    const auto d_now = f.discriminator.parameters();
    auto d_old = before.discriminator.parameters();
    for (std::size_t i = 0; i < d_now.size(); ++i) {
      std::ranges::copy(d_now[i].data(), d_old[i].data().begin());
      d_old[i].set_requires_grad(false);
    }
    Tape tape;
    const Tensor fake = before.generator.forward(tape, before.batch.guide, before.batch.thermal_lr)
                            .prediction_raw;
    const Tensor l_mse = mse(tape, fake, before.batch.thermal_hr);
    const Tensor adv = gan_g_loss(tape, before.discriminator.forward(tape, fake), cfg.gan_variant);
    const Tensor total = combined_loss(tape, l_mse, adv, cfg.lambda);
    EXPECT_NEAR(l_mse.item(), terms.l_mse, 1e-9);
    EXPECT_NEAR(total.item(), terms.l_total, 1e-6 * std::abs(terms.l_total));
    tape.backward(total);
    const auto expected = grads_of(before.generator.parameters());
    const auto actual = grads_of(f.generator.parameters());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const double scale = std::max(1.0, max_abs_diff(expected[i], std::vector<float>(expected[i].size())));
      EXPECT_LT(max_abs_diff(expected[i], actual[i]), 1e-6 * scale) << i << " scale " << scale;
    }
  }
  for (const Tensor& p : f.discriminator.parameters()) EXPECT_TRUE(p.requires_grad());
}

TEST(TrainStep, RepeatedBatchReducesMse) {
  Rng data(25);
  std::vector<SamplePair> items;
  for (int i = 0; i < 4; ++i) {
    items.push_back(sample_patches(scene("s" + std::to_string(i), 120, 160, data), PatchSize{40, 30}, data));
  }
  const SamplePair batch = make_batch(items);
  Rng rng(26);
  TrainConfig cfg;
  cfg.generator = tiny_generator();
  Generator g(cfg.generator, rng);
  Discriminator d(1, rng);
  Optimizers opt = make_optimizers(g, d);
  std::vector<double> mse_trace;
  for (int step = 0; step <= 50; ++step) mse_trace.push_back(train_step(batch, g, d, opt, cfg).l_mse);
  int decreases = 0;
  for (std::size_t i = 1; i < mse_trace.size(); ++i) decreases += mse_trace[i] < mse_trace[i - 1];
  EXPECT_GE(decreases, 45) << "first " << mse_trace.front() << " last " << mse_trace.back();
}

TEST(TrainStep, DeterministicLossSequence) {
  auto run = [] {
    StepFixture f;
    Optimizers opt = make_optimizers(f.generator, f.discriminator);
    std::vector<double> trace;
    for (int i = 0; i < 3; ++i) {
      const LossTerms t = train_step(f.batch, f.generator, f.discriminator, opt, tiny_train_config());
      trace.insert(trace.end(), {t.l_mse, t.l_g_adv, t.l_d, t.l_total});
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainStep, NonFiniteLossIsNamed) {
  StepFixture f;
  Optimizers opt = make_optimizers(f.generator, f.discriminator);
  Tensor b = f.discriminator.layer(3).bias;
  b.data()[0] = std::numeric_limits<float>::infinity();
  try {
    train_step(f.batch, f.generator, f.discriminator, opt, tiny_train_config());
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("l_d"), std::string::npos) << e.what();
  }
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST(TrainLoop, LogRowsAndCheckpoints) {
  TempDir dir("loop_log");
  const DatasetSplit data = scene_split(6, 2, 31);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 3;
  cfg.checkpoint_every = 2;
  int callbacks = 0;
  const TrainSummary s = train_loop(data, cfg, TrainOptions{dir.path(), std::nullopt, [&](const EpochRecord&) {
                                                              ++callbacks;
                                                            }});
  EXPECT_EQ(callbacks, 3);
  ASSERT_EQ(s.history.size(), 3u);
  EXPECT_EQ(s.history.back().step, 6);  // 6 samples, batch 4 -> 2 steps per epoch
  const auto rows = lines(read_file(dir.path() / "metrics.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], kMetricLogHeader);
  for (int e = 1; e <= 3; ++e) {
    EXPECT_EQ(rows[e].substr(0, rows[e].find(',')), std::to_string(e));
    EXPECT_EQ(std::ranges::count(rows[e], ','), 7);
    EXPECT_EQ(rows[e].find("nan"), std::string::npos);
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "epoch_0002.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "epoch_0003.state.json"));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "epoch_0001.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "best.json"));
  EXPECT_EQ(s.last_checkpoint, dir.path() / "epoch_0003.json");
}

TEST(TrainLoop, ResumeMatchesUninterruptedRun) {
  TempDir full("loop_full"), part("loop_part");
  const DatasetSplit data = scene_split(6, 2, 32);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 3;
  cfg.shift_limit = 0.1;
  train_loop(data, cfg, TrainOptions{full.path()});

  TrainConfig first = cfg;
  first.epochs = 1;
  train_loop(data, first, TrainOptions{part.path()});
  // A stale row past the resume point must be dropped.
  {
    std::ofstream(part.path() / "metrics.csv", std::ios::app) << "2,99,0,0,0,0,0,0\n";
  }
  const TrainSummary resumed =
      train_loop(data, cfg, TrainOptions{part.path(), part.path() / "epoch_0001.state.json"});
  ASSERT_EQ(resumed.history.size(), 2u);
  EXPECT_EQ(resumed.history.front().epoch, 2);
  EXPECT_EQ(read_file(full.path() / "metrics.csv"), read_file(part.path() / "metrics.csv"));
  for (const char* blob : {"epoch_0003.bin", "epoch_0003.state.bin", "best.bin"}) {
    EXPECT_TRUE(read_file(full.path() / blob) == read_file(part.path() / blob)) << blob;
  }
}

TEST(TrainLoop, ResumeRejectsOtherSeed) {
  TempDir dir("loop_seed");
  const DatasetSplit data = scene_split(4, 0, 33);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 1;
  train_loop(data, cfg, TrainOptions{dir.path()});
  cfg.epochs = 2;
  cfg.seed += 1;
  EXPECT_THROW(train_loop(data, cfg, TrainOptions{dir.path(), dir.path() / "epoch_0001.state.json"}),
               ConfigError);
}

TEST(TrainLoop, EmptyValidationLogsNanAndKeepsFinalAsBest) {
  TempDir dir("loop_noval");
  const DatasetSplit data = scene_split(4, 0, 34);
  TrainConfig cfg = tiny_train_config();
  const TrainSummary s = train_loop(data, cfg, TrainOptions{dir.path()});
  EXPECT_TRUE(std::isnan(s.history.back().val_psnr));
  const auto rows = lines(read_file(dir.path() / "metrics.csv"));
  EXPECT_NE(rows.back().find("nan"), std::string::npos);
  EXPECT_TRUE(read_file(dir.path() / "best.bin") == read_file(dir.path() / "epoch_0002.bin"));
}

TEST(TrainLoop, RejectsEmptyTrainSplit) {
  TempDir dir("loop_empty");
  EXPECT_THROW(train_loop(DatasetSplit{}, tiny_train_config(), TrainOptions{dir.path()}), ConfigError);
}

}  // namespace
}  // namespace lapgsr

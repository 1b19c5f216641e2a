#include <algorithm>
#include <cmath>
#include <limits>

#include "lapgsr/error.hpp"
#include "lapgsr/model.hpp"
#include "lapgsr/pyramid.hpp"
#include "ablation_grid.hpp"
#include "support.hpp"

namespace lapgsr {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

GeneratorConfig small_config(int64_t channels = 1) {
  GeneratorConfig cfg;
  cfg.blocks_ltb = 1;
  cfg.blocks_mtb = 1;
  cfg.blocks_htb = 1;
  cfg.width_ltb = 8;
  cfg.width_mtb = 8;
  cfg.width_htb = 6;
  cfg.stem_ltb = 4;
  cfg.channels = channels;
  return cfg;
}

// Replaces every parameter with small random values so that no gradient path
// is blocked by the identity start.
void randomize(const Generator& g, Rng& rng, double scale = 0.3) {
  for (auto& [name, t] : g.named_parameters()) {
    Tensor p = t;
    for (float& v : p.data()) v = static_cast<float>(scale * rng.normal());
  }
}

TEST(GeneratorConfig, ValidationAndJson) {
  GeneratorConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  GeneratorConfig bad = cfg;
  bad.blocks_mtb = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_NO_THROW(bad.validate(true));
  bad = cfg;
  bad.scale = 8;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.channels = 2;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.channels = 3;
  bad.width_htb = 2;
  EXPECT_THROW(bad.validate(), ConfigError);

  const nlohmann::json j = cfg;
  EXPECT_EQ(j.get<GeneratorConfig>(), cfg);
  nlohmann::json extra = j;
  extra["depth"] = 3;
  EXPECT_THROW(extra.get<GeneratorConfig>(), ConfigError);
  EXPECT_EQ(nlohmann::json::object().get<GeneratorConfig>(), GeneratorConfig{});
}

TEST(Generator, OutputShapesGrayscale) {
  Rng rng(1);
  const Generator g(GeneratorConfig{}, rng);
  Tape tape(Tape::Mode::kInference);
  const auto out = g.forward(tape, Tensor(Shape{1, 1, 240, 320}, 0.5f), Tensor(Shape{1, 1, 60, 80}, 0.5f));
  EXPECT_EQ(out.prediction.shape(), (Shape{1, 1, 240, 320}));
  EXPECT_EQ(out.layers.mid.shape(), (Shape{1, 1, 120, 160}));
  EXPECT_EQ(out.layers.low.shape(), (Shape{1, 1, 60, 80}));
}

TEST(Generator, OutputShapesColor) {
  Rng rng(2);
  GeneratorConfig cfg = small_config(3);
  const Generator g(cfg, rng);
  Tape tape(Tape::Mode::kInference);
  const auto out = g.forward(tape, Tensor(Shape{1, 3, 512, 640}, 0.5f), Tensor(Shape{1, 3, 128, 160}, 0.5f));
  EXPECT_EQ(out.prediction.shape(), (Shape{1, 3, 512, 640}));
}

TEST(Generator, ShapeContractHoldsForRandomExtents) {
  Rng rng(3);
  const Generator g(small_config(), rng);
  for (int trial = 0; trial < 5; ++trial) {
    const int64_t h = 4 * rng.uniform_int(2, 12), w = 4 * rng.uniform_int(2, 12);
    const int64_t n = rng.uniform_int(1, 3);
    Tape tape(Tape::Mode::kInference);
    const auto out = g.forward(tape, random_tensor(Shape{n, 1, h, w}, rng, 0, 1),
                               random_tensor(Shape{n, 1, h / 4, w / 4}, rng, 0, 1));
    EXPECT_EQ(out.prediction.shape(), (Shape{n, 1, h, w}));
  }
  Tape tape(Tape::Mode::kInference);
  EXPECT_THROW(g.forward(tape, Tensor(Shape{1, 1, 32, 32}), Tensor(Shape{1, 1, 8, 9})), ShapeError);
  EXPECT_THROW(g.forward(tape, Tensor(Shape{1, 3, 32, 32}), Tensor(Shape{1, 3, 8, 8})), ShapeError);
}

TEST(Generator, UntrainedModelIsTwoStepBicubic) {
  Rng rng(4);
  const Generator g(GeneratorConfig{}, rng);
  const Tensor guide = random_tensor(Shape{2, 1, 48, 64}, rng, 0, 1);
  const Tensor thermal = random_tensor(Shape{2, 1, 12, 16}, rng, 0, 1);
  Tape tape(Tape::Mode::kInference);
  const auto out = g.forward(tape, guide, thermal);
  const Tensor expected = bicubic_resize(tape, bicubic_resize(tape, thermal, ResizeScale::kUp2), ResizeScale::kUp2);
  EXPECT_LT(max_abs_diff(out.prediction_raw.data(), expected.data()), 1e-5);
  EXPECT_LT(max_abs_diff(out.layers.high.data(), Tensor(out.layers.high.shape()).data()), 1e-5);
}

TEST(Generator, ZeroThermalAnnihilatesLowLayer) {
  Rng rng(5);
  const Generator g(small_config(), rng);
  randomize(g, rng);
  Tape tape(Tape::Mode::kInference);
  const auto out = g.forward(tape, random_tensor(Shape{1, 1, 32, 40}, rng, 0, 1), Tensor(Shape{1, 1, 8, 10}));
  for (float v : out.layers.low.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Generator, TanhLayersBounded) {
  Rng rng(6);
  const Generator g(small_config(), rng);
  randomize(g, rng, 2.0);
  Tape tape(Tape::Mode::kInference);
  const auto out = g.forward(tape, random_tensor(Shape{1, 1, 32, 32}, rng, 0, 1),
                             random_tensor(Shape{1, 1, 8, 8}, rng, 0, 1));
  for (const Tensor* t : {&out.layers.mid, &out.layers.high}) {
    for (float v : t->data()) {
      EXPECT_GE(v, -1.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  for (float v : out.prediction.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Generator, RejectsNonFiniteInputsWithBranchName) {
  Rng rng(7);
  const Generator g(small_config(), rng);
  Tensor thermal(Shape{1, 1, 8, 8}, 0.5f);
  thermal.data()[3] = std::nanf("");
  Tape tape(Tape::Mode::kInference);
  EXPECT_THROW(g.forward(tape, Tensor(Shape{1, 1, 32, 32}), thermal), NumericError);

  // An overflowing low-branch gate is reported by name.
  for (auto& [name, t] : g.named_parameters()) {
    if (name == "ltb.out.bias") {
      Tensor b = t;
      b.data()[0] = std::numeric_limits<float>::infinity();
    }
  }
  try {
    g.forward(tape, Tensor(Shape{1, 1, 32, 32}), Tensor(Shape{1, 1, 8, 8}, 0.5f));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("low transformation branch"), std::string::npos) << e.what();
  }
}

TEST(Generator, ParameterRegistry) {
  Rng rng(8);
  const GeneratorConfig cfg;
  const Generator g(cfg, rng);
  const auto named = g.named_parameters();
  std::vector<std::string> names;
  for (const auto& [name, t] : named) names.push_back(name);
  auto sorted = names;
  std::ranges::sort(sorted);
  EXPECT_EQ(std::ranges::adjacent_find(sorted), sorted.end()) << "duplicate parameter names";
  EXPECT_EQ(names.front(), "ltb.stem.weight");
  EXPECT_EQ(names.back(), "htb.out.bias");
  EXPECT_NE(std::ranges::find(names, "mtb.blocks.2.conv2.weight"), names.end());
  EXPECT_EQ(g.parameter_count(), count_params(cfg));

  Rng again(8);
  const Generator g2(cfg, again);
  for (std::size_t i = 0; i < named.size(); ++i) {
    EXPECT_EQ(max_abs_diff(named[i].second.data(), g2.named_parameters()[i].second.data()), 0.0);
  }
}

TEST(CountParams, ResidualBlockDeltas) {
  GeneratorConfig base;
  for (int64_t b = 1; b <= 4; ++b) {
    GeneratorConfig a = base, c = base;
    a.blocks_ltb = b;
    c.blocks_ltb = b + 1;
    EXPECT_EQ(count_params(c) - count_params(a), 73856);
    a = base;
    c = base;
    a.blocks_mtb = b;
    c.blocks_mtb = b + 1;
    EXPECT_EQ(count_params(c) - count_params(a), 73856);
    a = base;
    c = base;
    a.blocks_htb = b;
    c.blocks_htb = b + 1;
    EXPECT_EQ(count_params(c) - count_params(a), 2616);
  }
}

TEST(CountParams, AblationGrid) {
  std::vector<int64_t> counts;
  for (const auto& row : testing::ablation_grid()) {
    const GeneratorConfig cfg = testing::ablation_config(row);
    counts.push_back(count_params(cfg));
    Rng rng(static_cast<uint64_t>(row.ltb * 100 + row.mtb * 10 + row.htb));
    EXPECT_EQ(Generator(cfg, rng).parameter_count(), counts.back());
    EXPECT_NEAR(static_cast<double>(counts.back()) / 1000.0, static_cast<double>(row.params_k), 0.03 * row.params_k);
  }
  EXPECT_TRUE(testing::ordering_matches(testing::ablation_grid(), counts));
  EXPECT_EQ(count_params(GeneratorConfig{}), 398075);
}

TEST(CountParams, MatchesRegistryWithoutLowStem) {
  GeneratorConfig cfg = small_config();
  cfg.stem_ltb = 0;
  Rng rng(9);
  const Generator g(cfg, rng);
  EXPECT_EQ(g.parameter_count(), count_params(cfg));
  for (const auto& [name, t] : g.named_parameters()) EXPECT_EQ(name.find("ltb.reduce"), std::string::npos);
}

TEST(EstimateFlops, BlockDeltasAndBoundaryOnly) {
  const GeneratorConfig base;
  GeneratorConfig more_mtb = base, more_htb = base;
  more_mtb.blocks_mtb += 1;
  more_htb.blocks_htb += 1;
  const double d_mtb = estimate_flops(more_mtb, 240, 320) - estimate_flops(base, 240, 320);
  const double d_htb = estimate_flops(more_htb, 240, 320) - estimate_flops(base, 240, 320);
  EXPECT_NEAR(d_mtb, 2.0 * 2.0 * 9 * 64 * 64 * 160 * 120 / 1e9, 1e-9);
  EXPECT_NEAR(d_htb, 2.0 * 2.0 * 9 * 12 * 12 * 320 * 240 / 1e9, 1e-9);

  GeneratorConfig zero = base;
  zero.blocks_ltb = zero.blocks_mtb = zero.blocks_htb = 0;
  const FlopBreakdown f = estimate_flops_breakdown(zero, 240, 320);
  const double ltb = 2.0 * 9 * 60 * 80 * (1 * 16 + 16 * 64 + 64 * 16 + 16 * 1);
  const double mtb = 2.0 * 9 * 120 * 160 * (2 * 64 + 64 * 1);
  const double htb = 2.0 * 9 * 240 * 320 * (2 * 12 + 12 * 1);
  EXPECT_NEAR(f.ltb, ltb / 1e9, 1e-12);
  EXPECT_NEAR(f.mtb, mtb / 1e9, 1e-12);
  EXPECT_NEAR(f.htb, htb / 1e9, 1e-12);
  EXPECT_DOUBLE_EQ(f.total(), estimate_flops(zero, 240, 320));
}

TEST(Discriminator, ScoreMapShapeAndLimits) {
  Rng rng(11);
  Discriminator d(1, rng);
  Tape tape(Tape::Mode::kInference);
  EXPECT_EQ(d.forward(tape, Tensor(Shape{2, 1, 120, 160})).shape(), (Shape{2, 1, 15, 20}));
  EXPECT_THROW(d.forward(tape, Tensor(Shape{1, 1, 15, 64})), ShapeError);
  EXPECT_THROW(d.forward(tape, Tensor(Shape{1, 3, 32, 32})), ShapeError);
}

TEST(Discriminator, ZeroWeightsGiveZeroScores) {
  Rng rng(12);
  Discriminator d(1, rng);
  for (auto& [name, t] : d.named_parameters()) {
    Tensor p = t;
    std::ranges::fill(p.data(), 0.0f);
  }
  Tape tape(Tape::Mode::kInference);
  const Tensor s = d.forward(tape, random_tensor(Shape{1, 1, 32, 48}, rng, 0, 1));
  for (float v : s.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Discriminator, InputGradientIsFinite) {
  Rng rng(13);
  Discriminator d(1, rng);
  Tensor x = random_tensor(Shape{2, 1, 48, 64}, rng, 0, 1);
  x.set_requires_grad(true);
  Tape tape;
  tape.backward(mean(tape, d.forward(tape, x)));
  ASSERT_TRUE(x.has_grad());
  double norm = 0.0;
  for (float v : x.grad()) {
    ASSERT_TRUE(std::isfinite(v));
    norm += std::abs(v);
  }
  EXPECT_GT(norm, 0.0);
}

}  // namespace
}  // namespace lapgsr

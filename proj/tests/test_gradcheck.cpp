#include <map>
#include <set>

#include "grad_cases.hpp"
#include "support.hpp"

namespace lapgsr {
namespace {

using testing::GradCase;

class OpGradient : public ::testing::TestWithParam<GradCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const testing::GradReport r = GetParam().run();
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    EXPECT_LT(r.errors[i], testing::kGradTolerance) << GetParam().op << " " << GetParam().label << " input " << i;
  }
}

std::string case_name(const ::testing::TestParamInfo<GradCase>& info) {
  std::string name = info.param.op + "_" + std::to_string(info.index);
  for (char& ch : name) {
    if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
  }
  return name;
}

INSTANTIATE_TEST_SUITE_P(Catalog, OpGradient, ::testing::ValuesIn(testing::grad_cases()), case_name);

TEST(OpGradientCatalog, EveryOpHasThreeShapes) {
  std::map<std::string, std::set<std::string>> labels;
  for (const GradCase& c : testing::grad_cases()) labels[c.op].insert(c.label);
  for (const char* op : {"leaky_relu", "relu", "tanh", "softplus", "square", "affine", "add", "sub", "mul",
                         "concat_channels", "instance_norm", "bicubic_up2", "bicubic_down2", "conv2d", "resize",
                         "mean", "sum", "mse"}) {
    ASSERT_TRUE(labels.contains(op)) << op;
    EXPECT_GE(labels[op].size(), 3u) << op;
  }
}

TEST(GeneratorGradient, SpotChecksPerBranch) {
  const auto checks = testing::generator_spot_checks(10);
  ASSERT_EQ(checks.size(), 3u);
  for (const auto& c : checks) {
    EXPECT_LT(c.relative_error(), testing::kSpotTolerance)
        << c.parameter << " analytic " << c.analytic << " numeric " << c.numeric;
  }
}

}  // namespace
}  // namespace lapgsr

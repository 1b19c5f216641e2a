#pragma once

#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "lapgsr/data_io.hpp"
#include "lapgsr/model.hpp"
#include "lapgsr/tensor.hpp"

namespace lapgsr {

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / mse) in dB; +inf when the images are identical.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 0.01,
/// K2 0.03, dynamic range 1). Multi-channel inputs average the per-channel
/// scores, then batch entries are averaged.
double ssim(const Tensor& a, const Tensor& b);

/// Maps one sample's inputs to a full-resolution thermal estimate.
class SuperResolver {
 public:
  virtual ~SuperResolver() = default;
  virtual std::string name() const = 0;
  virtual Tensor predict(const SamplePair& sample) const = 0;
};

class GeneratorResolver final : public SuperResolver {
 public:
  explicit GeneratorResolver(const Generator& generator) : generator_(generator) {}
  std::string name() const override { return "lapgsr"; }
  Tensor predict(const SamplePair& sample) const override;

 private:
  const Generator& generator_;
};

/// Keys bicubic 4x upsampling of the low-resolution thermal image.
class BicubicResolver final : public SuperResolver {
 public:
  std::string name() const override { return "bicubic"; }
  Tensor predict(const SamplePair& sample) const override;
};

/// Returns the ground truth; the metric upper bound.
class OracleResolver final : public SuperResolver {
 public:
  std::string name() const override { return "oracle"; }
  Tensor predict(const SamplePair& sample) const override { return sample.thermal_hr.detach(); }
};

struct SampleScore {
  std::string id;
  double psnr = 0;
  double ssim = 0;
};

struct EvalReport {
  std::string model;
  std::string split;
  nlohmann::json config = nlohmann::json::object();
  std::vector<SampleScore> samples;
  /// Mean over samples with finite PSNR; NaN when none are finite.
  double mean_psnr = 0;
  double mean_ssim = 0;
  int64_t infinite_psnr = 0;

  int64_t count() const { return static_cast<int64_t>(samples.size()); }
};

/// Scores every sample at full resolution in order. Throws ConfigError for an
/// empty split.
EvalReport evaluate(const SuperResolver& model, const std::vector<SamplePair>& samples,
                    const std::string& split_name, const nlohmann::json& config = {});

/// "inf" for the identical-image sentinel, otherwise fixed with 6 decimals.
std::string format_psnr(double value);

/// id,psnr,ssim rows.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
nlohmann::json report_summary(const EvalReport& report);
void write_report_json(const std::filesystem::path& path, const EvalReport& report);

}  // namespace lapgsr

#include "lapgsr/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lapgsr/error.hpp"
#include "lapgsr/ops.hpp"

namespace lapgsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& src, int64_t h, int64_t w,
                                 const std::array<double, kWindow>& g) {
  const int64_t oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * src[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y) {
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

double ssim_plane(const float* a, const float* b, int64_t h, int64_t w,
                  const std::array<double, kWindow>& g) {
  const auto n = static_cast<std::size_t>(h * w);
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a[i];
    y[i] = b[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, g);
  const auto my = filter_valid(y, h, w, g);
  const auto sxx = filter_valid(xx, h, w, g);
  const auto syy = filter_valid(yy, h, w, g);
  const auto sxy = filter_valid(xy, h, w, g);
  const double c1 = (kK1 * 1.0) * (kK1 * 1.0);
  const double c2 = (kK2 * 1.0) * (kK2 * 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  const auto da = a.data();
  const auto db = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    acc += d * d;
  }
  if (acc == 0.0) return kPsnrInfinity;
  const double m = acc / static_cast<double>(da.size());
  return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ssim");
  const Shape& s = a.shape();
  if (s.h < kWindow || s.w < kWindow) {
    throw ShapeError("ssim: extents " + std::to_string(s.w) + "x" + std::to_string(s.h) +
                     " are smaller than the 11x11 window");
  }
  static const auto g = gaussian_window();
  double total = 0.0;
  for (int64_t n = 0; n < s.n; ++n) {
    double per_image = 0.0;
    for (int64_t c = 0; c < s.c; ++c) {
      const int64_t offset = (n * s.c + c) * s.plane();
      per_image += ssim_plane(a.data().data() + offset, b.data().data() + offset, s.h, s.w, g);
    }
    total += per_image / static_cast<double>(s.c);
  }
  return total / static_cast<double>(s.n);
}

Tensor GeneratorResolver::predict(const SamplePair& sample) const {
  Tape tape(Tape::Mode::kInference);
  return generator_.forward(tape, sample.guide, sample.thermal_lr).prediction;
}

Tensor BicubicResolver::predict(const SamplePair& sample) const {
  Tape tape(Tape::Mode::kInference);
  const Shape& s = sample.thermal_lr.shape();
  return clamp01(resize(tape, sample.thermal_lr, 4 * s.h, 4 * s.w, false));
}

EvalReport evaluate(const SuperResolver& model, const std::vector<SamplePair>& samples,
                    const std::string& split_name, const json& config) {
  if (samples.empty()) throw ConfigError("evaluate: split '" + split_name + "' is empty");
  EvalReport report;
  report.model = model.name();
  report.split = split_name;
  report.config = config.is_null() ? json::object() : config;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  int64_t finite = 0;
  for (const SamplePair& sample : samples) {
    const Tensor pred = model.predict(sample);
    SampleScore score{sample.id, psnr(pred, sample.thermal_hr), ssim(pred, sample.thermal_hr)};
    if (std::isinf(score.psnr)) {
      ++report.infinite_psnr;
    } else {
      psnr_sum += score.psnr;
      ++finite;
    }
    ssim_sum += score.ssim;
    report.samples.push_back(std::move(score));
  }
  report.mean_psnr = finite > 0 ? psnr_sum / static_cast<double>(finite)
                                : std::numeric_limits<double>::quiet_NaN();
  report.mean_ssim = ssim_sum / static_cast<double>(report.samples.size());
  return report;
}

std::string format_psnr(double value) {
  if (std::isinf(value)) return "inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

void write_report_csv(const fs::path& path, const EvalReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,psnr,ssim\n";
  char buf[64];
  for (const SampleScore& s : report.samples) {
    std::snprintf(buf, sizeof(buf), "%.8f", s.ssim);
    out << s.id << ',' << format_psnr(s.psnr) << ',' << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

json report_summary(const EvalReport& report) {
  json j{{"model", report.model},
         {"split", report.split},
         {"count", report.count()},
         {"mean_ssim", report.mean_ssim},
         {"infinite_psnr_count", report.infinite_psnr},
         {"config", report.config}};
  if (std::isnan(report.mean_psnr)) {
    j["mean_psnr"] = "inf";
  } else {
    j["mean_psnr"] = report.mean_psnr;
  }
  return j;
}

void write_report_json(const fs::path& path, const EvalReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_summary(report).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace lapgsr

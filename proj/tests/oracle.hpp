#pragma once

// Test oracles and scratch helpers shared by the unit tests and the
// acceptance runner; no test framework dependency.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "lapgsr/ops.hpp"
#include "lapgsr/rng.hpp"
#include "lapgsr/tensor.hpp"

namespace lapgsr::testing {

inline Tensor random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline Tensor random_normal(const Shape& s, Rng& rng, double stddev = 1.0) {
  Tensor t(s);
  for (float& v : t.data()) v = static_cast<float>(stddev * rng.normal());
  return t;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

inline std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

/// ||a - b|| / max(||b||, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                             double floor = 1e-12) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

/// Double-precision forward of an op: inputs -> flattened output.
using RefForward = std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;
using OpForward = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradReport {
  std::vector<double> errors;  // one per input
  double worst() const {
    double w = 0.0;
    for (double e : errors) w = std::max(w, e);
    return w;
  }
};

/// Compares the tape gradient of sum(op(x) * r) for a fixed random r against
/// central differences of the double-precision reference forward.
inline GradReport gradcheck(const OpForward& op, const RefForward& ref, std::vector<Tensor> inputs,
                            Rng& rng, double step = 1e-5) {
  for (Tensor& t : inputs) t.set_requires_grad(true);
  Tape tape;
  const Tensor out = op(tape, inputs);
  const Tensor r = random_tensor(out.shape(), rng);
  const Tensor loss = sum(tape, mul(tape, out, r));
  tape.backward(loss);

  std::vector<std::vector<double>> base;
  for (const Tensor& t : inputs) base.push_back(to_double(t.data()));
  const std::vector<double> rv = to_double(r.data());
  auto objective = [&](const std::vector<std::vector<double>>& x) {
    const auto y = ref(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * rv[i];
    return acc;
  };

  GradReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> numeric(base[k].size());
    auto x = base;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double orig = x[k][i];
      x[k][i] = orig + step;
      const double fp = objective(x);
      x[k][i] = orig - step;
      const double fm = objective(x);
      x[k][i] = orig;
      numeric[i] = (fp - fm) / (2.0 * step);
    }
    const std::vector<double> analytic =
        inputs[k].has_grad() ? to_double(inputs[k].grad()) : std::vector<double>(numeric.size(), 0.0);
    report.errors.push_back(relative_error(analytic, numeric));
  }
  return report;
}

/// Fresh scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("lapgsr_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace lapgsr::testing

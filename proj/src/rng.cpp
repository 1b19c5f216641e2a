#include "lapgsr/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lapgsr/error.hpp"

namespace lapgsr {

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw ConfigError("uniform_int: empty range");
  const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<int64_t>(next_u64());
  const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  uint64_t draw = next_u64();
  while (draw >= limit) draw = next_u64();
  return lo + static_cast<int64_t>(draw % range);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<int64_t> Rng::permutation(int64_t n) {
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[i] = i;
  for (int64_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_int(0, i)]);
  return order;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << counter_ << ' ' << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> seed_ >> counter_ >> engine_;
  if (!is) throw ConfigError("Rng::restore: malformed state");
}

}  // namespace lapgsr

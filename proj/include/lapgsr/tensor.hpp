#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lapgsr {

/// Extents of a rank-4 (batch, channel, height, width) tensor.
struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t numel() const { return n * c * h * w; }
  int64_t plane() const { return h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
  /// "NxCxHxW"
  std::string str() const;
};

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until the first accumulation
  bool requires_grad = false;
};
}  // namespace detail

/// Reference-counted handle to a float32 NCHW buffer.
///
/// Copies share storage, so a Tensor passed by value still aliases the
/// caller's data; use clone() or detach() for an independent buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor scalar(float value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t numel() const { return shape().numel(); }

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;
  float& at(int64_t n, int64_t c, int64_t h, int64_t w);
  float at(int64_t n, int64_t c, int64_t h, int64_t w) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const float> grad() const;
  /// Allocates a zero gradient buffer on first use. Only valid when
  /// requires_grad() is true. Const because the buffer belongs to the shared
  /// node, not the handle.
  std::span<float> mutable_grad() const;
  void zero_grad();

  /// Independent copy of the data with no gradient history.
  Tensor detach() const;
  /// Independent copy of the data that keeps requires_grad.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Records differentiable operations in execution order so that a single
/// reverse sweep can propagate gradients.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::kRecord; }

  /// True when an op with these inputs must be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const;

  /// Appends an entry. `propagate` reads output's gradient and accumulates
  /// into the gradients of whichever inputs require them.
  void record(const Tensor& output, std::function<void()> propagate);

  /// Seeds d(loss)/d(loss) = 1, runs every entry once in reverse order and
  /// clears the tape. Throws ShapeError for a non-scalar loss and Error if
  /// the loss was not produced on this tape.
  void backward(const Tensor& loss);

  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Tensor output;
    std::function<void()> propagate;
  };
  Mode mode_;
  std::vector<Entry> entries_;
};

}  // namespace lapgsr

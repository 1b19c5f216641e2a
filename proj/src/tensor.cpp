#include "lapgsr/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "lapgsr/error.hpp"

namespace lapgsr {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

namespace {
void check_extents(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw ShapeError("negative tensor extent " + s.str());
  }
}
}  // namespace

Tensor::Tensor(Shape shape, float fill) : node_(std::make_shared<detail::TensorNode>()) {
  check_extents(shape);
  node_->shape = shape;
  node_->data.assign(static_cast<std::size_t>(shape.numel()), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : node_(std::make_shared<detail::TensorNode>()) {
  check_extents(shape);
  if (static_cast<int64_t>(values.size()) != shape.numel()) {
    throw ShapeError("tensor " + shape.str() + " needs " + std::to_string(shape.numel()) +
                     " values, got " + std::to_string(values.size()));
  }
  node_->shape = shape;
  node_->data = std::move(values);
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{1, 1, 1, 1}, value); }

const Shape& Tensor::shape() const {
  static const Shape kEmpty{};
  return node_ ? node_->shape : kEmpty;
}

std::span<float> Tensor::data() { return node_->data; }
std::span<const float> Tensor::data() const { return node_->data; }

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor " + shape().str());
  return node_->data[0];
}

float& Tensor::at(int64_t n, int64_t c, int64_t h, int64_t w) {
  const Shape& s = node_->shape;
  return node_->data[static_cast<std::size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

float Tensor::at(int64_t n, int64_t c, int64_t h, int64_t w) const {
  const Shape& s = node_->shape;
  return node_->data[static_cast<std::size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  node_->requires_grad = value;
  if (!value) node_->grad.clear();
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const float> Tensor::grad() const { return node_->grad; }

std::span<float> Tensor::mutable_grad() const {
  if (!node_->requires_grad) throw Error("gradient requested for a tensor without requires_grad");
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0f);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data); }

Tensor Tensor::clone() const {
  Tensor t(shape(), node_->data);
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(const Tensor& output, std::function<void()> propagate) {
  entries_.push_back(Entry{output, std::move(propagate)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + loss.shape().str());
  }
  const auto produced = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) {
    return e.output.same_storage(loss);
  });
  if (produced == entries_.end()) {
    throw Error("backward(): loss was not produced on this tape");
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0f;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.has_grad()) it->propagate();
  }
  entries_.clear();
}

}  // namespace lapgsr

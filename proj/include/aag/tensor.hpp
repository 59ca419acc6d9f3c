#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aag/error.hpp"

namespace aag {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

namespace detail {

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the backward pass touches this node
  bool requires_grad = false;
};

}  // namespace detail

// Dense n-dimensional array over a contiguous row-major buffer. Copying a
// Tensor copies the handle, not the storage; ops return fresh tensors, so
// buffers are never mutated behind a reader's back (optimizer updates to
// leaf parameters are the deliberate exception). Constness follows pointer
// semantics: a const Tensor still reaches mutable node state, which is what
// lets backward closures accumulate into grads of captured inputs.
template <class T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() : node_(std::make_shared<detail::TensorNode<T>>()) {}

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<detail::TensorNode<T>>()) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value), requires_grad);
  }

  static Tensor scalar_tensor(T value) { return Tensor({1}, {value}); }

  const Shape& shape() const { return node_->shape; }
  std::int64_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t rank() const { return node_->shape.size(); }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->data.size()); }

  std::span<T> data() const { return node_->data; }
  T* data_ptr() const { return node_->data.data(); }

  T scalar() const {
    if (node_->data.size() != 1) {
      throw DimensionError("scalar() on tensor of shape " + shape_str(node_->shape));
    }
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }

  // Grad buffer, allocated (zeroed) on first use.
  std::vector<T>& grad_buffer() const {
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
    return node_->grad;
  }

  void zero_grad() const {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  void accumulate_grad(std::span<const T> g) const {
    if (g.size() != node_->data.size()) {
      throw DimensionError("gradient length mismatch");
    }
    auto& buf = grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
  }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  std::shared_ptr<detail::TensorNode<T>> node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode<T>> node_;
};

// Recorded backward program for one forward evaluation. Ops append an entry
// when an active tape exists and some input requires grad; backward() replays
// entries newest-first. Single-threaded by contract.
template <class T>
class Tape {
 public:
  struct Entry {
    const char* op;
    std::function<void()> backward;
  };

  void record(const char* op, std::function<void()> backward) {
    entries_.push_back(Entry{op, std::move(backward)});
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

  // Seed d(root)/d(root) = 1 for a scalar root, then replay.
  void backward(Tensor<T> root) {
    if (root.size() != 1) {
      throw DimensionError("backward() root must be scalar, got shape " + shape_str(root.shape()));
    }
    root.grad_buffer()[0] = T(1);
    replay();
  }

  // Seed explicit gradients into several tensors (e.g. embedding matrices
  // whose gradients were computed outside the tape), then replay.
  void backward_seeded(std::span<const std::pair<Tensor<T>, std::span<const T>>> seeds) {
    for (const auto& [tensor, grad] : seeds) {
      Tensor<T> t = tensor;
      t.accumulate_grad(grad);
    }
    replay();
  }

  void replay() {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  }

 private:
  std::vector<Entry> entries_;
};

namespace detail {

template <class T>
inline thread_local Tape<T>* g_active_tape = nullptr;

}  // namespace detail

template <class T>
Tape<T>* active_tape() {
  return detail::g_active_tape<T>;
}

// RAII activation of a tape on the current thread. Ops run forward-only when
// no tape is active.
template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(detail::g_active_tape<T>) {
    detail::g_active_tape<T> = &tape;
  }
  ~TapeScope() { detail::g_active_tape<T> = previous_; }

  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

}  // namespace aag

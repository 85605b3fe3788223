#pragma once

// Dense row-major tensors with tape-free reverse-mode autodiff.
//
// Every op result that depends on a requires_grad input carries a GradNode
// holding its inputs and a backward closure. backward(loss) walks the graph
// in reverse topological order and accumulates into each input's grad
// buffer. The graph is consumed: after backward() the nodes of all visited
// intermediates are released, so a second backward through the same
// intermediates throws. Leaf gradients accumulate until zero_grad().

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nerfsteg/random.hpp"

namespace nerfsteg {

using Shape = std::vector<std::size_t>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cache-line aligned storage; Eigen reductions stay independent of heap addresses.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct GradNode {
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Receives the op output (data + accumulated grad) and adds into inputs.
  std::function<void(const TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  Buffer<T> data;
  Buffer<T> grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool graph_consumed = false;
  std::shared_ptr<GradNode<T>> node;

  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Global switch for graph recording; disabled inside a NoGradGuard scope.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using Impl = detail::TensorImpl<T>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::span<const T> data);
  BasicTensor(Shape shape, std::initializer_list<T> data) : BasicTensor(std::move(shape), std::span<const T>(data.begin(), data.size())) {}
  BasicTensor(Shape shape, Buffer<T> data);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor full(Shape shape, T value) { return BasicTensor(std::move(shape), value); }
  static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, value); }
  static BasicTensor uniform(Shape shape, T lo, T hi, Rng& rng);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T operator[](std::size_t i) const { return impl_->data[i]; }
  T& operator[](std::size_t i) { return impl_->data[i]; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl_->node == nullptr; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> grad() { return impl_->grad; }
  void zero_grad();

  /// New leaf holding a copy of the data, outside any graph.
  BasicTensor detach() const;

  const std::shared_ptr<Impl>& impl() const { return impl_; }
  static BasicTensor from_impl(std::shared_ptr<Impl> impl) {
    BasicTensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Builds an op output. A GradNode is attached only when grad mode is on
/// and at least one input requires grad.
template <typename T>
BasicTensor<T> make_result(Shape shape, Buffer<T> data,
                           const std::vector<BasicTensor<T>>& inputs,
                           std::function<void(const detail::TensorImpl<T>&)> backward);

/// Reverse pass from a single-element tensor.
template <typename T>
void backward(const BasicTensor<T>& loss);

}  // namespace nerfsteg

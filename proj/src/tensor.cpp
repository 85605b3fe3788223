#include "nerfsteg/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace nerfsteg {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {
thread_local bool grad_mode_enabled = true;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
}
}  // namespace

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool on) { grad_mode_enabled = on; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::span<const T> data)
    : BasicTensor(std::move(shape), Buffer<T>(data.begin(), data.end())) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, Buffer<T> data) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  if (shape_numel(shape) != data.size())
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(Shape shape, T lo, T hi, Rng& rng) {
  BasicTensor t(std::move(shape));
  for (auto& v : t.impl_->data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (!is_leaf()) throw UsageError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(impl_->shape, impl_->data);
}

template <typename T>
BasicTensor<T> make_result(Shape shape, Buffer<T> data, const std::vector<BasicTensor<T>>& inputs,
                           std::function<void(const detail::TensorImpl<T>&)> backward_fn) {
  BasicTensor<T> out(std::move(shape), std::move(data));
  if (!GradMode::enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const BasicTensor<T>& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::GradNode<T>>();
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward_fn);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  using Impl = detail::TensorImpl<T>;
  if (!loss.defined() || loss.numel() != 1)
    throw UsageError("backward() requires a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) throw UsageError("backward() on a tensor that does not require grad");

  if (loss.impl()->graph_consumed)
    throw UsageError("backward() through a graph that was already consumed by a previous backward()");

  // Iterative post-order DFS; reversed it is a valid reverse-topological order.
  // Owning pointers keep intermediates alive while their parents' nodes are released.
  std::vector<std::shared_ptr<Impl>> order;
  std::unordered_set<Impl*> seen;
  std::vector<std::pair<std::shared_ptr<Impl>, std::size_t>> stack;
  stack.emplace_back(loss.impl(), 0);
  seen.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [cur, next] = stack.back();
    if (cur->node && next < cur->node->inputs.size()) {
      auto child = cur->node->inputs[next++];
      if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      continue;
    }
    order.push_back(std::move(cur));
    stack.pop_back();
  }

  loss.impl()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl& cur = **it;
    if (!cur.node) continue;
    if (!cur.grad.empty()) cur.node->backward(cur);
    cur.node.reset();
    cur.graph_consumed = true;
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> make_result(Shape, Buffer<float>, const std::vector<BasicTensor<float>>&,
                                        std::function<void(const detail::TensorImpl<float>&)>);
template BasicTensor<double> make_result(Shape, Buffer<double>, const std::vector<BasicTensor<double>>&,
                                         std::function<void(const detail::TensorImpl<double>&)>);
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);

}  // namespace nerfsteg

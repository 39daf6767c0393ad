#include "slimmatch/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace slimmatch {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
};

}  // namespace detail

namespace {

thread_local FlopLedger* tls_ledger = nullptr;
thread_local bool tls_grad_enabled = true;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void FlopLedger::record(std::string_view kind, std::uint64_t macs) {
  auto it = counters_.find(kind);
  if (it == counters_.end()) {
    counters_.emplace(std::string(kind), macs);
  } else {
    it->second += macs;
  }
}

std::uint64_t FlopLedger::count(std::string_view kind) const {
  auto it = counters_.find(kind);
  return it == counters_.end() ? 0 : it->second;
}

std::uint64_t FlopLedger::total() const {
  std::uint64_t sum = 0;
  for (const auto& [kind, macs] : counters_) sum += macs;
  return sum;
}

FlopRecording::FlopRecording(FlopLedger& ledger) : previous_(tls_ledger) { tls_ledger = &ledger; }
FlopRecording::~FlopRecording() { tls_ledger = previous_; }

void record_macs(std::string_view kind, std::uint64_t macs) {
  if (tls_ledger != nullptr) tls_ledger->record(kind, macs);
}

NoGradGuard::NoGradGuard() : previous_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tls_grad_enabled = previous_; }

bool grad_enabled() { return tls_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() requires a single element, got shape " + shape_str(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw std::logic_error("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node_->is_leaf(); }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::vector<double> Tensor::grad_or_zero() const {
  if (has_grad()) return node_->grad;
  return std::vector<double>(numel(), 0.0);
}

void Tensor::zero_grad() { node_->grad.assign(numel(), 0.0); }

Tensor Tensor::detach() const { return from_data(node_->shape, node_->value, false); }

Tensor Tensor::clone() const { return from_data(node_->shape, node_->value, node_->requires_grad); }

Tensor Tensor::make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                       BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  if (shape_numel(shape) != value.size()) {
    throw ShapeError("op result shape " + shape_str(shape) + " does not match " +
                     std::to_string(value.size()) + " values");
  }
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool track =
      tls_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
        return t.defined() && t.node_->requires_grad;
      });
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a single-element loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  auto root = loss.node_;
  if (!root->requires_grad) return;

  // Iterative post-order DFS; `order` ends up in topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child != nullptr && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) {
    if (node->is_leaf()) {
      if (node->grad.size() != node->value.size()) node->grad.assign(node->value.size(), 0.0);
    } else {
      node->grad.assign(node->value.size(), 0.0);
    }
  }
  root->grad[0] += 1.0;

  std::vector<double*> in_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf()) continue;
    in_grads.clear();
    for (auto& in : node->inputs) {
      in_grads.push_back(in && in->requires_grad ? in->grad.data() : nullptr);
    }
    node->backward(node->value, node->grad, in_grads);
  }
}

}  // namespace slimmatch

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slimmatch/errors.hpp"

namespace slimmatch {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Multiply-accumulate counters keyed by operation kind. Only ops that perform
// multiplications record into it; additions and activations are free.
class FlopLedger {
 public:
  void record(std::string_view kind, std::uint64_t macs);
  std::uint64_t count(std::string_view kind) const;
  std::uint64_t total() const;
  const std::map<std::string, std::uint64_t, std::less<>>& counters() const { return counters_; }
  void reset() { counters_.clear(); }

 private:
  std::map<std::string, std::uint64_t, std::less<>> counters_;
};

// Installs `ledger` as the recording target for the current thread until
// destruction. Nested scopes restore the previous ledger.
class FlopRecording {
 public:
  explicit FlopRecording(FlopLedger& ledger);
  ~FlopRecording();
  FlopRecording(const FlopRecording&) = delete;
  FlopRecording& operator=(const FlopRecording&) = delete;

 private:
  FlopLedger* previous_;
};

void record_macs(std::string_view kind, std::uint64_t macs);

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {
struct Node;
}

// Receives the output value, the output gradient, and one gradient buffer per
// input (null when that input does not need a gradient). Implementations
// accumulate into the input buffers.
using BackwardFn = std::function<void(std::span<const double> out_value,
                                      std::span<const double> out_grad,
                                      std::span<double* const> in_grads)>;

// Dense row-major array of doubles with optional reverse-mode gradient
// tracking. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access. Intended for leaves (parameters, inputs); mutating an
  // interior node invalidates any recorded gradient that depends on it.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  // Gradient buffer; empty span until backward() reached this tensor.
  std::span<const double> grad() const;
  // Gradient or zeros when none has been accumulated.
  std::vector<double> grad_or_zero() const;
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Builds an interior node. `backward` is only kept when recording is enabled
  // and at least one input requires a gradient.
  static Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                        BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend void backward(const Tensor& loss);

  std::shared_ptr<detail::Node> node_;
};

// Reverse-mode sweep from a single-element tensor. Leaf gradients accumulate
// across calls; interior gradients are recomputed each call.
void backward(const Tensor& loss);

}  // namespace slimmatch

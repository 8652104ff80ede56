#pragma once

// Minimal reverse-mode automatic differentiation over dense float64 tensors.
//
// Tensors are immutable value handles. Operations build new tensors and, when
// a Tape is active on the calling thread and any input requires a gradient,
// append a record holding a local backward rule. Gradients live in the
// Gradients map returned by Tape::backward, never inside the tensors, so a
// parameter tensor can be read by several tapes on different threads at once.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace svl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  // Leaf constructor. Throws shape_mismatch when values.size() differs from
  // the product of the dims or any dim is zero.
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }
  std::span<const double> data() const { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }
  std::uint64_t id() const { return node_->id; }

  // Same values, fresh identity, no gradient tracking.
  Tensor detach() const;

 private:
  struct Node {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::uint64_t id = 0;
  };

  Tensor() = default;
  std::shared_ptr<const Node> node_;

  friend class Tape;
  friend Tensor make_result(Shape shape, std::vector<double> values,
                            bool requires_grad);
};

// Creates an interior (non-leaf) tensor. Used by op implementations.
Tensor make_result(Shape shape, std::vector<double> values, bool requires_grad);

class Gradients {
 public:
  // Null when the tensor received no gradient.
  const std::vector<double>* find(const Tensor& t) const;
  const std::vector<double>* find_id(std::uint64_t id) const;
  // Gradient of t, zeros when absent.
  std::vector<double> get(const Tensor& t) const;
  bool has(const Tensor& t) const { return find(t) != nullptr; }

  std::vector<double>& slot(std::uint64_t id, std::size_t size);

 private:
  std::unordered_map<std::uint64_t, std::vector<double>> grads_;
};

// Local backward rule. grad_out is dL/d(output); input_grads[i] points at the
// accumulator for input i, or is null when that input needs no gradient.
using BackwardRule = std::function<void(
    std::span<const double> grad_out, std::span<std::vector<double>*> input_grads)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Records are appended only while a Scope is open on this thread.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  void record(std::vector<Tensor> inputs, const Tensor& output, BackwardRule rule);

  // Reverse sweep from a scalar loss. Throws shape_mismatch for non-scalar
  // losses. Visits every record once, newest first.
  Gradients backward(const Tensor& loss) const;

  std::size_t size() const { return records_.size(); }
  bool topological() const;
  void clear() { records_.clear(); }

 private:
  struct Record {
    std::vector<Tensor> inputs;
    std::uint64_t output_id;
    std::size_t output_size;
    BackwardRule rule;
  };
  std::vector<Record> records_;
};

// ---- operations -----------------------------------------------------------

enum class EwKind { add, sub, mul, scale, square };

// Elementwise op. b must match a's shape or be a rank-0 tensor, which is
// broadcast over every element of a. square ignores b.
Tensor ew(EwKind kind, const Tensor& a, const Tensor& b);
Tensor ew(EwKind kind, const Tensor& a, double b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor exp(const Tensor& a);

// a: ...xMxK (leading dims flattened), b: KxN.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // rank 2 only
Tensor reshape(const Tensor& a, Shape shape);

// out[i, :] = a[i, :] + bias for a of shape MxN and bias of shape N.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);

enum class ReduceKind { sum, mean, max };
// Removes `axis`. max routes the gradient to the first maximal element.
Tensor reduce(const Tensor& t, std::size_t axis, ReduceKind kind);
Tensor sum(const Tensor& t, std::size_t axis);
Tensor mean(const Tensor& t, std::size_t axis);
Tensor max(const Tensor& t, std::size_t axis);
Tensor sum_all(const Tensor& t);

Tensor normalize_l2(const Tensor& t, std::size_t axis);
Tensor softmax(const Tensor& t, std::size_t axis);
Tensor log_softmax(const Tensor& t, std::size_t axis);

// Stacks same-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);
// Concatenates rank-2 tensors along columns.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& t, std::size_t begin, std::size_t count);
// Row r of a rank-2 tensor as a rank-1 tensor.
Tensor row(const Tensor& t, std::size_t r);

// Unary op with caller-supplied values and local derivative. Used by the
// neuron module to install surrogate gradients on spike functions.
Tensor custom_unary(const Tensor& input, std::vector<double> values,
                    std::vector<double> local_grad);

// ---- gradient checking ----------------------------------------------------

struct GradCheckReport {
  // Worst per-element relative error for each parameter.
  std::vector<double> max_rel_error;
  double worst() const;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Central differences against autodiff. Relative error per element is
// |a - n| / max(|a|, |n|, 1e-3).
GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor>& params,
                           double eps = 1e-5);

}  // namespace svl

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "casegraph/numerics/functional.hpp"
#include "casegraph/numerics/tensor.hpp"

namespace casegraph::numerics {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode record of primitive applications. Values are stored as 2-D
// matrices; saved operands are the recorded input values themselves.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Parameter leaf; backward() accumulates into param.grad. The tensor must
  // outlive the tape and must not be resized while recorded.
  Var param(Tensor& param);
  // Read-only leaf over a tensor that outlives the tape; never receives grads.
  Var view(const Tensor& tensor);

  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const;
  // Gradient buffer for an interior node; allocated on first use.
  std::span<double> grad(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Accumulates d loss / d param into every parameter leaf. Parameters that
  // were recorded but are unreachable receive zero-filled buffers.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    Tensor* param = nullptr;
    const Tensor* view = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  void check_owned(Var v) const;
  std::vector<Node> nodes_;
};

// Differentiable primitives. All operands must live on the same tape.
namespace ops {

Var matmul(Var a, Var b);                  // (m x k) * (k x n)
Var transpose(Var a);
Var add(Var a, Var b);                     // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);                     // elementwise
Var add_row(Var a, Var bias);              // bias broadcast over rows
Var scale(Var a, double factor);
Var abs(Var a);
Var activate(Var a, Activation act);
Var softmax_rows(Var a);
Var layer_norm_rows(Var a, Var gamma, Var beta, double eps);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var gather_rows(Var a, std::span<const std::size_t> index);
// out has `rows` rows; out[index[k]] += a[k]
Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t rows);
// softmax of a column vector within groups sharing a segment id
Var segment_softmax(Var scores, std::span<const std::size_t> segment, std::size_t segments);
// out[k, :] = a[k, :] * w[k]; w is a column vector with a.rows() rows
Var scale_rows(Var a, Var w);
// multiplies by a fixed mask (dropout with precomputed inverted scaling)
Var mask(Var a, std::vector<double> mask);
Var sum(Var a);                            // 1 x 1
// -log softmax(logits)[label] for a 1 x C row
Var cross_entropy(Var logits, std::size_t label);

// Affine map x * W + b for row-stacked inputs.
inline Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

}  // namespace ops

}  // namespace casegraph::numerics

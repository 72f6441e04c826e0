#include "casegraph/numerics/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>

#include "casegraph/error.hpp"

namespace casegraph::numerics {

std::size_t element_count(const std::vector<std::size_t>& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    fail(ErrorKind::Shape, "tensor data length " + std::to_string(data_.size()) +
                               " does not match shape product " +
                               std::to_string(element_count(shape_)));
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, std::vector<double>{value}); }

std::size_t Tensor::rows() const noexcept {
  if (shape_.size() < 2) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  if (shape_.size() == 1) return shape_[0];
  return shape_[1];
}

void Tensor::zero_grad() {
  if (!grad) {
    grad.emplace(data_.size(), 0.0);
  } else {
    std::fill(grad->begin(), grad->end(), 0.0);
  }
}

std::vector<double>& Tensor::ensure_grad() {
  if (!grad) grad.emplace(data_.size(), 0.0);
  return *grad;
}

}  // namespace casegraph::numerics

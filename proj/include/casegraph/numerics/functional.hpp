#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace casegraph::numerics {

// Numerically stable softmax (max-subtracted). Throws Domain on empty or
// non-finite input.
std::vector<double> softmax(std::span<const double> x);

// gamma * (x - mean) / sqrt(var + eps) + beta, variance with 1/N.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gamma,
                               std::span<const double> beta, double eps = 1e-5);

enum class ActivationKind { LeakyRelu, Elu, Relu };

struct Activation {
  ActivationKind kind = ActivationKind::Relu;
  double slope = 0.2;  // leaky_relu only

  static Activation leaky_relu(double slope) { return {ActivationKind::LeakyRelu, slope}; }
  static Activation elu() { return {ActivationKind::Elu, 0.0}; }
  static Activation relu() { return {ActivationKind::Relu, 0.0}; }

  double apply(double x) const noexcept;
  double derivative(double x) const noexcept;
};

std::vector<double> activation(std::span<const double> x, Activation act);

// Dense kernels over row-major storage: C (m x n) += A (m x k) * B (k x n),
// with optional transposition of either operand as stored.
void gemm_accumulate(std::span<const double> a, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n, bool transpose_a,
                     bool transpose_b);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> x);

}  // namespace casegraph::numerics

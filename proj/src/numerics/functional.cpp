#include "casegraph/numerics/functional.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "casegraph/error.hpp"

namespace casegraph::numerics {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

}  // namespace

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) fail(ErrorKind::Domain, "softmax of an empty vector");
  double peak = x[0];
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::Domain, "softmax input is not finite");
    peak = std::max(peak, v);
  }
  std::vector<double> out(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gamma,
                               std::span<const double> beta, double eps) {
  if (x.size() != gamma.size() || x.size() != beta.size()) {
    fail(ErrorKind::Shape, "layer_norm length mismatch: x=" + std::to_string(x.size()) +
                               " gamma=" + std::to_string(gamma.size()) +
                               " beta=" + std::to_string(beta.size()));
  }
  if (x.empty()) fail(ErrorKind::Shape, "layer_norm of an empty vector");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double denom = std::sqrt(var + eps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // constant input with eps == 0 is 0/0; the centered numerator is exactly zero
    const double centered = x[i] - mean;
    out[i] = gamma[i] * (denom > 0.0 ? centered / denom : 0.0) + beta[i];
  }
  return out;
}

double Activation::apply(double x) const noexcept {
  switch (kind) {
    case ActivationKind::LeakyRelu:
      return x >= 0.0 ? x : slope * x;
    case ActivationKind::Elu:
      return x >= 0.0 ? x : std::expm1(x);
    case ActivationKind::Relu:
      return x > 0.0 ? x : 0.0;
  }
  return x;
}

double Activation::derivative(double x) const noexcept {
  switch (kind) {
    case ActivationKind::LeakyRelu:
      return x >= 0.0 ? 1.0 : slope;
    case ActivationKind::Elu:
      return x >= 0.0 ? 1.0 : std::exp(x);
    case ActivationKind::Relu:
      return x > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

std::vector<double> activation(std::span<const double> x, Activation act) {
  if (act.kind == ActivationKind::LeakyRelu && (act.slope < 0.0 || act.slope >= 1.0)) {
    fail(ErrorKind::Domain, "leaky_relu slope must lie in [0, 1)");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) fail(ErrorKind::Domain, "activation input is not finite");
    out[i] = act.apply(x[i]);
  }
  return out;
}

void gemm_accumulate(std::span<const double> a, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n, bool transpose_a,
                     bool transpose_b) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto ni = static_cast<Eigen::Index>(n);
  MutMap out(c.data(), mi, ni);
  if (!transpose_a && !transpose_b) {
    out.noalias() += ConstMap(a.data(), mi, ki) * ConstMap(b.data(), ki, ni);
  } else if (transpose_a && !transpose_b) {
    out.noalias() += ConstMap(a.data(), ki, mi).transpose() * ConstMap(b.data(), ki, ni);
  } else if (!transpose_a && transpose_b) {
    out.noalias() += ConstMap(a.data(), mi, ki) * ConstMap(b.data(), ni, ki).transpose();
  } else {
    out.noalias() +=
        ConstMap(a.data(), ki, mi).transpose() * ConstMap(b.data(), ni, ki).transpose();
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Shape, "dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

}  // namespace casegraph::numerics

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "casegraph/numerics/tensor.hpp"

namespace casegraph::numerics {

struct AdamWConfig {
  double lr = 5e-5;
  double weight_decay = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW with decoupled weight decay:
//   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
class AdamW {
 public:
  AdamW(AdamWConfig config, std::vector<Tensor*> params);

  // Reads each parameter's grad (missing grads count as zero).
  void step();
  void zero_grad();

  void set_lr(double lr);
  double lr() const noexcept { return config_.lr; }
  std::uint64_t step_count() const noexcept { return steps_; }
  const AdamWConfig& config() const noexcept { return config_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  AdamWConfig config_;
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t steps_ = 0;
};

// lr(epoch) = lr0 * gamma^floor(epoch / step_size)
struct StepLr {
  double base_lr = 5e-5;
  std::size_t step_size = 25;
  double gamma = 0.5;

  double lr_at(std::size_t epoch) const;
};

// Scales every gradient by max_norm / g when the global L2 norm g exceeds
// max_norm. Returns the norm measured before clipping.
double clip_global_norm(std::span<Tensor* const> params, double max_norm);
double global_grad_norm(std::span<Tensor* const> params);

}  // namespace casegraph::numerics

#include "casegraph/numerics/optim.hpp"

#include <cmath>
#include <string>

#include "casegraph/error.hpp"

namespace casegraph::numerics {

AdamW::AdamW(AdamWConfig config, std::vector<Tensor*> params)
    : config_(config), params_(std::move(params)) {
  if (!(config_.lr >= 0.0)) fail(ErrorKind::Config, "AdamW lr must be nonnegative");
  if (!(config_.weight_decay >= 0.0)) fail(ErrorKind::Config, "AdamW weight decay must be nonnegative");
  if (!(config_.beta1 > 0.0 && config_.beta1 < 1.0 && config_.beta2 > 0.0 && config_.beta2 < 1.0)) {
    fail(ErrorKind::Config, "AdamW betas must lie in (0, 1)");
  }
  if (!(config_.eps > 0.0)) fail(ErrorKind::Config, "AdamW eps must be positive");
  for (Tensor* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamW::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    if (m_[i].size() != p.size()) {
      fail(ErrorKind::Shape, "parameter " + std::to_string(i) + " changed size since AdamW init");
    }
    if (p.grad && p.grad->size() != p.size()) {
      fail(ErrorKind::Shape, "gradient of parameter " + std::to_string(i) + " has wrong length");
    }
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = p.grad ? (*p.grad)[j] : 0.0;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      p[j] -= config_.lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * p[j]);
    }
  }
}

void AdamW::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

void AdamW::set_lr(double lr) {
  if (!(lr >= 0.0)) fail(ErrorKind::Config, "AdamW lr must be nonnegative");
  config_.lr = lr;
}

double StepLr::lr_at(std::size_t epoch) const {
  if (step_size == 0) fail(ErrorKind::Config, "schedule step size must be positive");
  return base_lr * std::pow(gamma, static_cast<double>(epoch / step_size));
}

double global_grad_norm(std::span<Tensor* const> params) {
  double total = 0.0;
  for (const Tensor* p : params) {
    if (!p->grad) continue;
    for (double g : *p->grad) total += g * g;
  }
  return std::sqrt(total);
}

double clip_global_norm(std::span<Tensor* const> params, double max_norm) {
  if (!(max_norm > 0.0)) fail(ErrorKind::Config, "clip max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor* p : params) {
      if (!p->grad) continue;
      for (double& g : *p->grad) g *= factor;
    }
  }
  return norm;
}

}  // namespace casegraph::numerics

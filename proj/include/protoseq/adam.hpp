#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "protoseq/param.hpp"

namespace protoseq {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam update with bias correction. Gradients must have been
// populated by at least one backward pass; they are zeroed afterwards.
inline void adam_step(std::span<Parameter* const> params, const AdamConfig& cfg) {
  for (Parameter* p : params)
    if (!p->grad_live) throw std::logic_error("adam_step: parameter " + p->name + " has no gradient");
  for (Parameter* p : params) {
    p->step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step_count));
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double g = p->grad[i];
      p->adam_m[i] = cfg.beta1 * p->adam_m[i] + (1.0 - cfg.beta1) * g;
      p->adam_v[i] = cfg.beta2 * p->adam_v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->adam_m[i] / bc1;
      const double vhat = p->adam_v[i] / bc2;
      p->value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p->zero_grad();
  }
}

inline void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace protoseq

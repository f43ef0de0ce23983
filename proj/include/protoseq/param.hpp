#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "protoseq/tensor.hpp"

namespace protoseq {

// A trainable tensor with its Adam state. Gradients accumulate across
// backward passes until an optimizer step (or zero_grad) clears them.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step_count = 0;
  bool grad_live = false;  // set once a backward pass has written grads

  Parameter() = default;
  Parameter(std::string n, Tensor init)
      : name(std::move(n)),
        value(std::move(init)),
        grad(value.numel(), 0.0),
        adam_m(value.numel(), 0.0),
        adam_v(value.numel(), 0.0) {}

  std::size_t numel() const { return value.numel(); }

  void zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
    grad_live = false;
  }

  void accumulate(const std::vector<double>& g) {
    if (g.size() != grad.size())
      throw std::logic_error("parameter " + name + ": gradient size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    grad_live = true;
  }
};

}  // namespace protoseq

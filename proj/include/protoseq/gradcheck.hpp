#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "protoseq/adam.hpp"
#include "protoseq/tape.hpp"

namespace protoseq {

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t entries_checked = 0;
  double tol = 1e-4;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> failures;  // entries exceeding tol

  bool ok() const { return max_rel_err < tol; }
};

// Compares backward() gradients against central finite differences
// (f(p+h) - f(p-h)) / 2h for every entry of every parameter. The builder must
// be deterministic (dropout in eval mode, fixed inputs). The relative-error
// denominator is floored at 1e-5: central differences at h = 1e-5 carry
// ~1e-10 of rounding noise, so entries below the floor are effectively
// compared absolutely rather than flagged for noise. Checks are meaningful
// only away from relu/max kinks; random inits keep pre-activations off the
// exact kink points.
template <class BuildLoss>
GradCheckReport grad_check(BuildLoss&& build_loss, std::span<Parameter* const> params, double h = 1e-5,
                           double tol = 1e-4) {
  GradCheckReport report;
  report.tol = tol;

  zero_grads(params);
  {
    Tape tape(true);
    Var loss = build_loss(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);
  zero_grads(params);

  auto eval = [&]() {
    Tape tape(false);
    return build_loss(tape).scalar();
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + h;
      const double fp = eval();
      p.value.data[i] = orig - h;
      const double fm = eval();
      p.value.data[i] = orig;

      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-5});
      const double rel = std::abs(a - numeric) / denom;

      GradCheckEntry e{p.name, i, a, numeric, rel};
      ++report.entries_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = e;
      }
      if (rel >= tol) report.failures.push_back(e);
    }
  }
  return report;
}

}  // namespace protoseq

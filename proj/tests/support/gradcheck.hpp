#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "molvae/core/tensor.hpp"

namespace molvae::testing {

// Central finite-difference gradient oracle (64-bit). `build` must evaluate
// the scalar loss from the given input tensors through a fresh tape; it is
// called repeatedly with perturbed copies.
struct GradCheckResult {
  bool ok = true;
  double worst_rel = 0.0;
  std::string worst_where;
};

using LossFn =
    std::function<double(const std::vector<Tensor<double>>&, std::vector<Tensor<double>>*)>;

// Returns analytic-vs-numeric comparison over every element of every input.
// h = 1e-5, pass when |a - f| <= tol * max(|a|, |f|) + 1e-8.
inline GradCheckResult check_gradients(const LossFn& loss,
                                       std::vector<Tensor<double>> inputs,
                                       double tol = 1e-4, double h = 1e-5) {
  std::vector<Tensor<double>> analytic;
  loss(inputs, &analytic);

  GradCheckResult res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (long i = 0; i < inputs[k].size(); ++i) {
      double saved = inputs[k][i];
      inputs[k][i] = saved + h;
      double up = loss(inputs, nullptr);
      inputs[k][i] = saved - h;
      double down = loss(inputs, nullptr);
      inputs[k][i] = saved;
      double numeric = (up - down) / (2 * h);
      double a = analytic[k][i];
      double err = std::abs(a - numeric);
      double denom = std::max(std::abs(a), std::abs(numeric));
      double rel = err / (denom + 1e-12);
      bool pass = err <= tol * denom + 1e-8;
      if (!pass) {
        res.ok = false;
        if (rel > res.worst_rel) {
          res.worst_rel = rel;
          res.worst_where = "input " + std::to_string(k) + " element " + std::to_string(i) +
                            " analytic " + std::to_string(a) + " numeric " +
                            std::to_string(numeric);
        }
      }
    }
  }
  return res;
}

}  // namespace molvae::testing

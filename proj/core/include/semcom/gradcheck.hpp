#pragma once

#include <functional>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  double composition_tolerance = 1e-3;
  std::uint64_t seed = 42;
  int shapes_per_op = 3;
};

// Central finite differences of `forward` (a scalar function of the watched
// inputs) against the tape gradient. Relative error per coordinate is
// |fd - analytic| / max(|fd|, |analytic|, 1e-3).
double max_relative_gradient_error(
    const std::vector<Tensor>& inputs,
    const std::function<Tensor(const std::vector<Tensor>&)>& forward, double step);

// Randomized finite-difference checks for every differentiable operation.
std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opts = {});

// Finite-difference check of the full encoder -> channel codec -> simulated
// channel -> decoder -> cross-entropy composition on a small model
// (d=16, L=6, vocab=20), sampling coordinates from every parameter tensor.
GradCheckResult run_composition_check(const GradCheckOptions& opts = {});

}  // namespace semcom

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "casd/tape.hpp"

namespace casd {

// Builds a scalar loss on the given tape, reading parameters via tape.parameter().
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// |a−b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// Compares reverse-mode gradients of `loss` against central differences
// (f(θ+ε)−f(θ−ε))/2ε for every entry of every parameter. Parameters are
// restored to their original values on return.
GradCheckResult grad_check(const LossBuilder& loss, const std::vector<Parameter*>& params, double eps = 1e-5);

}  // namespace casd

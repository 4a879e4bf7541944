#include "casd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "casd/error.hpp"

namespace casd {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape(GradMode::kDisabled);
  double v = loss(tape).value().item();
  if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss, const std::vector<Parameter*>& params, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::kConfig, "grad_check: epsilon must be positive");
  Tape tape;
  Var out = loss(tape);
  Gradients grads = tape.backward(out);

  GradCheckResult result;
  for (Parameter* p : params) {
    Tensor analytic = grads.of(*p);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double original = p->value[i];
      p->value[i] = original + eps;
      double up = 0.0, down = 0.0;
      try {
        up = evaluate(loss);
        p->value[i] = original - eps;
        down = evaluate(loss);
      } catch (...) {
        p->value[i] = original;
        throw;
      }
      p->value[i] = original;
      double numeric = (up - down) / (2.0 * eps);
      double err = relative_error(analytic[i], numeric);
      ++result.entries_checked;
      if (err > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace casd

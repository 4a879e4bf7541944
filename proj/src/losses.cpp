#include "casd/losses.hpp"

#include "casd/error.hpp"
#include "casd/ops.hpp"

namespace casd {

void validate(const LossWeights& w) {
  if (!(w.alpha >= 0.0)) fail(ErrorKind::kConfig, "alpha must be non-negative");
  if (!(w.beta >= 0.0)) fail(ErrorKind::kConfig, "beta must be non-negative");
  if (!(w.temperature > 0.0)) fail(ErrorKind::kConfig, "temperature must be positive");
}

Var ce_loss(Var logits, std::size_t label) {
  if (label >= logits.size()) {
    fail(ErrorKind::kData, "label " + std::to_string(label) + " outside [0, " + std::to_string(logits.size()) + ")");
  }
  return -pick(log_softmax(logits), label);
}

double ce_loss(const Tensor& logits, std::size_t label) {
  Tape tape(GradMode::kDisabled);
  return ce_loss(tape.constant(logits), label).value().item();
}

double kl_div(const Tensor& p, const Tensor& q) {
  Tape tape(GradMode::kDisabled);
  return kl_div(tape.constant(p), tape.constant(q)).value().item();
}

Var js_logits_loss(Var student_logits, Var teacher_logits, double temperature) {
  if (student_logits.shape() != teacher_logits.shape()) {
    fail(ErrorKind::kDimension, "js_logits_loss: class counts differ");
  }
  Var pa = softmax(student_logits, temperature);
  Var pb = softmax(stop_gradient(teacher_logits), temperature);
  Var mix = (pa + pb) * 0.5;
  return (kl_div(pa, mix) + kl_div(pb, mix)) * 0.5;
}

double js_logits_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature) {
  Tape tape(GradMode::kDisabled);
  return js_logits_loss(tape.constant(student_logits), tape.constant(teacher_logits), temperature).value().item();
}

Var uncertainty_consistency_loss(Var student_u, Var teacher_u) {
  if (student_u.shape() != teacher_u.shape()) {
    fail(ErrorKind::kDimension, "uncertainty_consistency_loss: shape mismatch " + shape_str(student_u.shape()) +
                                    " vs " + shape_str(teacher_u.shape()));
  }
  return mean(square(student_u - stop_gradient(teacher_u)));
}

double uncertainty_consistency_loss(const Tensor& student_u, const Tensor& teacher_u) {
  Tape tape(GradMode::kDisabled);
  return uncertainty_consistency_loss(tape.constant(student_u), tape.constant(teacher_u)).value().item();
}

Var total_loss(Var ce, Var logits_term, Var uncertainty_term, const LossWeights& w) {
  return ce + logits_term * w.alpha + uncertainty_term * w.beta;
}

double total_loss(double ce, double logits_term, double uncertainty_term, const LossWeights& w) {
  return ce + w.alpha * logits_term + w.beta * uncertainty_term;
}

}  // namespace casd

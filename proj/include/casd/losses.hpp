#pragma once

#include <cstddef>

#include "casd/tape.hpp"

namespace casd {

struct LossWeights {
  double alpha = 1.0;        // logits distillation
  double beta = 0.1;         // uncertainty distillation
  double temperature = 1.0;  // softening of both logit distributions
};

void validate(const LossWeights& w);

// −log softmax(logits)[label]
Var ce_loss(Var logits, std::size_t label);
double ce_loss(const Tensor& logits, std::size_t label);

// Σ p·log(p/q), both arguments must be normalized.
double kl_div(const Tensor& p, const Tensor& q);

// Jensen-Shannon divergence between softmax(student/τ) and softmax(teacher/τ).
// The teacher side is gradient-stopped.
Var js_logits_loss(Var student_logits, Var teacher_logits, double temperature);
double js_logits_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature);

// Mean over elements of (U_s − U_t)², teacher gradient-stopped. Batch
// averaging is left to the caller.
Var uncertainty_consistency_loss(Var student_u, Var teacher_u);
double uncertainty_consistency_loss(const Tensor& student_u, const Tensor& teacher_u);

// ce + alpha·logits + beta·uncertainty
Var total_loss(Var ce, Var logits_term, Var uncertainty_term, const LossWeights& w);
double total_loss(double ce, double logits_term, double uncertainty_term, const LossWeights& w);

}  // namespace casd

#include "casd/evidist.hpp"

#include <cmath>
#include <numbers>

#include "casd/error.hpp"
#include "casd/ops.hpp"

namespace casd {

void validate(const NIGParams& p) {
  require_same_shape(p.gamma, p.beta, "NIGParams");
  for (double b : p.beta.data()) {
    if (!(b > 0.0)) fail(ErrorKind::kDomain, "NIG beta must be positive");
  }
  if (!(p.delta > 0.0)) fail(ErrorKind::kDomain, "NIG delta must be positive");
  if (!(p.alpha > 1.0)) fail(ErrorKind::kDomain, "NIG alpha must exceed 1");
}

namespace {

NIGNode on_tape(Tape& tape, const NIGParams& p) {
  validate(p);
  return {tape.constant(p.gamma), tape.constant(p.beta), tape.constant(Tensor::scalar(p.delta)),
          tape.constant(Tensor::scalar(p.alpha))};
}

}  // namespace

StudentTNode nig_to_student(const NIGNode& p) {
  Var o = p.beta * ((1.0 + p.delta) / (p.delta * p.alpha));
  return {p.gamma, o, 2.0 * p.alpha};
}

StudentT nig_to_student(const NIGParams& p) {
  Tape tape(GradMode::kDisabled);
  StudentTNode s = nig_to_student(on_tape(tape, p));
  return {s.u.value(), s.o.value(), s.v.value().item()};
}

Var aleatoric(const NIGNode& p) { return p.beta / (p.alpha - 1.0); }

Tensor aleatoric(const NIGParams& p) {
  Tape tape(GradMode::kDisabled);
  return aleatoric(on_tape(tape, p)).value();
}

Var epistemic(const NIGNode& p) { return p.beta / (p.delta * (p.alpha - 1.0)); }

Tensor epistemic(const NIGParams& p) {
  Tape tape(GradMode::kDisabled);
  return epistemic(on_tape(tape, p)).value();
}

double sample_standard_t(double v, Rng& rng) {
  if (!(v > 0.0)) fail(ErrorKind::kDomain, "Student's t degrees of freedom must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> chi2(v / 2.0, 2.0);
  double z = normal(rng);
  double g = chi2(rng);
  return z / std::sqrt(g / v);
}

Tensor sample_standard_t(const Shape& shape, double v, Rng& rng) {
  Tensor t(shape);
  for (double& x : t.data()) x = sample_standard_t(v, rng);
  return t;
}

Tensor student_logpdf(const StudentT& d, const Tensor& x) {
  require_same_shape(d.u, x, "student_logpdf");
  require_same_shape(d.o, x, "student_logpdf");
  if (!(d.v > 0.0)) fail(ErrorKind::kDomain, "Student's t degrees of freedom must be positive");
  double v = d.v;
  double norm = std::lgamma((v + 1.0) / 2.0) - std::lgamma(v / 2.0) - 0.5 * std::log(v * std::numbers::pi);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double o = d.o[i];
    if (!(o > 0.0)) fail(ErrorKind::kDomain, "Student's t squared scale must be positive");
    double r = x[i] - d.u[i];
    out[i] = norm - 0.5 * std::log(o) - 0.5 * (v + 1.0) * std::log1p(r * r / (v * o));
  }
  return out;
}

}  // namespace casd

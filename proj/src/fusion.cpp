#include "casd/fusion.hpp"

#include <cmath>

#include "casd/error.hpp"
#include "casd/ops.hpp"

namespace casd {

ConfidenceWeights confidence_weights(double v1, double v2, double v3, bool normalized) {
  if (!(v1 > 0.0 && v2 > 0.0 && v3 > 0.0)) {
    fail(ErrorKind::kDomain, "confidence_weights: degrees of freedom must be positive");
  }
  ConfidenceWeights w{v1 / (v1 + v2), v2 / (v1 + v2), v3 / (v1 + v2 + v3)};
  if (normalized) {
    double total = w.c1 + w.c2 + w.c3;
    w = {w.c1 / total, w.c2 / total, w.c3 / total};
  }
  return w;
}

namespace {

void check_component(const StudentTNode& d, const StudentTNode& ref, int index) {
  if (d.u.shape() != ref.u.shape() || d.o.shape() != ref.u.shape()) {
    fail(ErrorKind::kDimension, "fuse: modality " + std::to_string(index) + " has shape " +
                                    shape_str(d.u.shape()) + ", expected " + shape_str(ref.u.shape()));
  }
  if (d.v.size() != 1) fail(ErrorKind::kDimension, "fuse: degrees of freedom must be scalar");
  if (!(d.v.value()[0] > 2.0)) {
    fail(ErrorKind::kDomain, "fuse: modality " + std::to_string(index) + " has v <= 2");
  }
}

StudentTNode on_tape(Tape& tape, const StudentT& d) {
  return {tape.constant(d.u), tape.constant(d.o), tape.constant(Tensor::scalar(d.v))};
}

}  // namespace

FusedNode fuse(const StudentTNode& d1, const StudentTNode& d2, const StudentTNode& d3,
               const FusionOptions& options) {
  check_component(d1, d1, 1);
  check_component(d2, d1, 2);
  check_component(d3, d1, 3);
  Var v1 = d1.v, v2 = d2.v, v3 = d3.v;

  FusedNode f;
  std::array<Var, 3> dofs{v1, v2, v3};
  f.v = minimum(dofs);

  if (options.mode == FusionMode::kMean) {
    Var third = d1.v.tape().constant(Tensor::scalar(1.0 / 3.0));
    f.weights = {third, third, third};
    f.u = (d1.u + d2.u + d3.u) * (1.0 / 3.0);
  } else {
    Var c1 = v1 / (v1 + v2);
    Var c2 = v2 / (v1 + v2);
    Var c3 = v3 / (v1 + v2 + v3);
    if (options.normalized_weights) {
      Var total = c1 + c2 + c3;
      c1 = c1 / total;
      c2 = c2 / total;
      c3 = c3 / total;
    }
    f.weights = {c1, c2, c3};
    f.u = c1 * d1.u + c2 * d2.u + c3 * d3.u;
  }

  // Scale corrections relative to modality 1: v_i(v1−2) / (v1(v_i−2)).
  Var k2 = (v2 * (v1 - 2.0)) / (v1 * (v2 - 2.0));
  Var k3 = (v3 * (v1 - 2.0)) / (v1 * (v3 - 2.0));
  f.sigma = (d1.o + k2 * d2.o + k3 * d3.o) * (1.0 / 3.0);
  f.uncertainty = uncertainty_score(f.sigma, f.v);
  return f;
}

FusedStudentT fuse(const StudentT& d1, const StudentT& d2, const StudentT& d3, const FusionOptions& options) {
  Tape tape(GradMode::kDisabled);
  FusedNode n = fuse(on_tape(tape, d1), on_tape(tape, d2), on_tape(tape, d3), options);
  return {n.u.value(),
          n.sigma.value(),
          n.v.value().item(),
          {n.weights[0].value().item(), n.weights[1].value().item(), n.weights[2].value().item()},
          n.uncertainty.value()};
}

Var uncertainty_score(Var sigma_F, Var v_F) {
  return sigma_F * v_F / clamp_min(v_F - 3.0, kUncertaintyDofFloor);
}

Tensor uncertainty_score(const FusedStudentT& f) {
  Tape tape(GradMode::kDisabled);
  return uncertainty_score(tape.constant(f.sigma_F), tape.constant(Tensor::scalar(f.v_F))).value();
}

NoiseSource NoiseSource::replay(std::vector<Tensor> draws) {
  NoiseSource n;
  n.draws_ = std::move(draws);
  return n;
}

Tensor NoiseSource::draw(const Shape& shape, double v) {
  if (rng_) {
    draws_.push_back(sample_standard_t(shape, v, *rng_));
    return draws_.back();
  }
  if (next_ >= draws_.size()) fail(ErrorKind::kUsage, "NoiseSource: replay sequence exhausted");
  const Tensor& t = draws_[next_++];
  if (t.shape() != shape) fail(ErrorKind::kDimension, "NoiseSource: replayed draw has shape " + shape_str(t.shape()));
  return t;
}

Var rrm_sample(const FusedNode& f, NoiseSource* noise, RepresentationMode mode) {
  if (mode == RepresentationMode::kInfer) return f.u;
  if (!noise) fail(ErrorKind::kUsage, "rrm_sample: train mode needs a noise source");
  Var t = f.u.tape().constant(noise->draw(f.u.shape(), f.v.value().item()));
  return f.u + sqrt(f.sigma) * t;
}

Tensor rrm_sample(const FusedStudentT& f, Rng* rng, RepresentationMode mode) {
  if (mode == RepresentationMode::kInfer) return f.u_F;
  if (!rng) fail(ErrorKind::kUsage, "rrm_sample: train mode needs a generator");
  Tensor s = f.u_F;
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += std::sqrt(f.sigma_F[i]) * sample_standard_t(f.v_F, *rng);
  return s;
}

}  // namespace casd

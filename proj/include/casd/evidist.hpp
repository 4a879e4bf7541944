#pragma once

#include "casd/random.hpp"
#include "casd/tape.hpp"
#include "casd/tensor.hpp"

namespace casd {

// Normal-Inverse-Gamma evidential parameters of one modality. gamma and beta
// are per-element maps; delta and alpha are per-modality scalars.
struct NIGParams {
  Tensor gamma;
  Tensor beta;   // > 0
  double delta;  // > 0
  double alpha;  // > 1
};

// Location-scale Student's t with squared scale `o`, element-wise over a
// feature map and a shared degrees of freedom.
struct StudentT {
  Tensor u;
  Tensor o;  // > 0
  double v;  // > 0
};

// Graph counterparts; delta, alpha and v are single-element nodes.
struct NIGNode {
  Var gamma;
  Var beta;
  Var delta;
  Var alpha;
};

struct StudentTNode {
  Var u;
  Var o;
  Var v;
};

void validate(const NIGParams& p);

// u = gamma, o = beta(1+delta)/(delta·alpha), v = 2·alpha.
StudentTNode nig_to_student(const NIGNode& p);
StudentT nig_to_student(const NIGParams& p);

// beta/(alpha−1)
Var aleatoric(const NIGNode& p);
Tensor aleatoric(const NIGParams& p);

// beta/(delta(alpha−1))
Var epistemic(const NIGNode& p);
Tensor epistemic(const NIGParams& p);

// One draw from St(0, 1, v): z/√(g/v) with z ~ N(0,1), g ~ χ²(v) = Gamma(v/2, 2).
double sample_standard_t(double v, Rng& rng);
Tensor sample_standard_t(const Shape& shape, double v, Rng& rng);

// Element-wise log-density of d at x.
Tensor student_logpdf(const StudentT& d, const Tensor& x);

}  // namespace casd

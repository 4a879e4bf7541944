#pragma once

#include <array>
#include <vector>

#include "casd/evidist.hpp"
#include "casd/random.hpp"
#include "casd/tape.hpp"

namespace casd {

enum class FusionMode {
  kConfidence,  // dof-derived confidence weights
  kMean,        // u_F = (u1+u2+u3)/3, ablation baseline
};

struct FusionOptions {
  FusionMode mode = FusionMode::kConfidence;
  // Divide the confidence weights by their sum (they otherwise add up to more than 1).
  bool normalized_weights = false;
};

struct ConfidenceWeights {
  double c1;
  double c2;
  double c3;
};

// Denominator floor of the uncertainty score, v_F − 3 ≥ 1e-3.
inline constexpr double kUncertaintyDofFloor = 1e-3;

// C1 = v1/(v1+v2), C2 = v2/(v1+v2), C3 = v3/(v1+v2+v3).
ConfidenceWeights confidence_weights(double v1, double v2, double v3, bool normalized = false);

// Modalities are ordered (language, audio, vision).
struct FusedStudentT {
  Tensor u_F;
  Tensor sigma_F;  // squared scale
  double v_F;
  ConfidenceWeights weights;
  Tensor U_F;
};

struct FusedNode {
  Var u;
  Var sigma;
  Var v;
  std::array<Var, 3> weights;
  Var uncertainty;
};

FusedNode fuse(const StudentTNode& d1, const StudentTNode& d2, const StudentTNode& d3,
               const FusionOptions& options = {});
FusedStudentT fuse(const StudentT& d1, const StudentT& d2, const StudentT& d3, const FusionOptions& options = {});

// Σ_F·v_F / max(v_F−3, 1e-3)
Var uncertainty_score(Var sigma_F, Var v_F);
Tensor uncertainty_score(const FusedStudentT& f);

// Supplies the standard-t noise of the reparameterized sample. Live sources
// draw from a caller-owned generator and remember what they drew; replay
// sources hand back a frozen sequence regardless of the requested dof.
class NoiseSource {
 public:
  explicit NoiseSource(Rng& rng) : rng_(&rng) {}
  static NoiseSource replay(std::vector<Tensor> draws);

  Tensor draw(const Shape& shape, double v);
  const std::vector<Tensor>& recorded() const { return draws_; }

 private:
  NoiseSource() = default;
  Rng* rng_ = nullptr;
  std::vector<Tensor> draws_;
  std::size_t next_ = 0;
};

enum class RepresentationMode { kTrain, kInfer };

// Train: s = u_F + √Σ_F ⊙ t with one draw per element and t gradient-stopped.
// Infer: s = u_F.
Var rrm_sample(const FusedNode& f, NoiseSource* noise, RepresentationMode mode);
Tensor rrm_sample(const FusedStudentT& f, Rng* rng, RepresentationMode mode);

}  // namespace casd

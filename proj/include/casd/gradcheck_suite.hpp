#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "casd/encoder.hpp"
#include "casd/gradcheck.hpp"
#include "casd/train.hpp"

namespace casd {

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEpsilon = 1e-5;
// The fused dof is a minimum; central differences are only meaningful when the
// smallest modality dof leads the next one by more than a step can move it.
inline constexpr double kDofTieMargin = 1e-3;
inline constexpr std::size_t kMaxEvaluationDraws = 100;

struct GradCheckEntry {
  std::string component;
  GradCheckResult result;

  bool passed() const { return result.max_rel_error <= kGradCheckTolerance; }
};

// Every differentiable primitive on randomized inputs (shapes up to 8×8), each
// reduced to a scalar through a fixed random projection, followed by the
// composite model pieces (encoder, evidential head, fusion, RRM, losses).
std::vector<GradCheckEntry> check_primitives(std::uint64_t seed);

// Total co-training loss of a freshly initialized student against a teacher,
// on one synthetic sample, with the RRM noise drawn once and replayed.
GradCheckEntry check_end_to_end(const EncoderConfig& model, const TrainConfig& train, std::uint64_t seed);

}  // namespace casd

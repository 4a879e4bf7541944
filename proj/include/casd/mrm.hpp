#pragma once

#include <vector>

#include "casd/datagen.hpp"
#include "casd/modality.hpp"
#include "casd/random.hpp"

namespace casd {

// Modality Random Missing: whole-modality removal plus frame dropout, both
// realized as zero vectors.
struct MrmConfig {
  double p_intra = 0.3;
  std::vector<ModalityMask> inter_patterns = all_nonempty_masks();
};

void validate(const MrmConfig& cfg);

// Zeroes every frame of modalities missing from `mask`, then zeroes each
// frame of the remaining modalities independently with probability p_intra.
ModalityInputs apply_condition(const ModalityInputs& x, ModalityMask mask, double p_intra, Rng& rng);

// Draws one pattern uniformly from cfg.inter_patterns and applies it together
// with cfg.p_intra. Labels are carried through untouched.
Sample mrm_corrupt(const Sample& sample, const MrmConfig& cfg, Rng& rng);

}  // namespace casd

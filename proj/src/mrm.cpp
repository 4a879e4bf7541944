#include "casd/mrm.hpp"

#include <algorithm>

#include "casd/error.hpp"

namespace casd {

void validate(const MrmConfig& cfg) {
  if (!(cfg.p_intra >= 0.0 && cfg.p_intra <= 1.0)) fail(ErrorKind::kConfig, "p_intra must lie in [0, 1]");
  if (cfg.inter_patterns.empty()) fail(ErrorKind::kConfig, "inter_patterns must not be empty");
  for (ModalityMask m : cfg.inter_patterns) {
    if (m.empty()) fail(ErrorKind::kConfig, "inter_patterns may not contain the all-missing mask");
  }
}

ModalityInputs apply_condition(const ModalityInputs& x, ModalityMask mask, double p_intra, Rng& rng) {
  ModalityInputs out = x;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    Tensor& seq = out[m];
    std::size_t T = seq.dim(0);
    if (!mask.has(m)) {
      std::fill(seq.data().begin(), seq.data().end(), 0.0);
      continue;
    }
    if (p_intra <= 0.0) continue;
    for (std::size_t t = 0; t < T; ++t) {
      bool drop = p_intra >= 1.0 || unit(rng) < p_intra;
      if (drop) std::ranges::fill(seq.row(t), 0.0);
    }
  }
  return out;
}

Sample mrm_corrupt(const Sample& sample, const MrmConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, cfg.inter_patterns.size() - 1);
  ModalityMask mask = cfg.inter_patterns[pick(rng)];
  return {apply_condition(sample.x, mask, cfg.p_intra, rng), sample.label};
}

}  // namespace casd

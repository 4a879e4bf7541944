#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "casd/datagen.hpp"
#include "casd/encoder.hpp"
#include "casd/losses.hpp"
#include "casd/metrics.hpp"
#include "casd/mrm.hpp"

namespace casd {

// Substream tags under the run seed; every stochastic decision in training
// draws from its own. Epoch shuffles use make_rng(seed, {tag, epoch}).
enum TrainStream : std::uint64_t {
  kTeacherInit = 10,
  kStudentInit = 11,
  kTeacherShuffle = 20,
  kTeacherNoise = 21,
  kCotrainShuffle = 30,
  kCorruption = 31,
  kStudentNoise = 32,
  kTeacherFinetuneNoise = 33,
  kEvalCorruption = 40,
};

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables clipping
};

struct TrainConfig {
  std::size_t epochs_teacher = 30;
  std::size_t epochs_cotrain = 5;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer;
  LossWeights loss;
  MrmConfig mrm;
  FusionOptions fusion;
  bool rrm = true;             // sample s ~ St(u_F, Σ_F, v_F) during training
  bool freeze_teacher = true;  // otherwise the teacher keeps training on complete samples
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// SGD with heavy-ball momentum and global gradient-norm clipping.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Parameter*> params, const OptimizerConfig& cfg);

  // Returns the pre-clip gradient norm.
  double step(const Gradients& grads);

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> velocity_;
  OptimizerConfig cfg_;
};

struct EpochLog {
  std::string phase;  // "teacher" or "cotrain"
  std::size_t epoch = 0;
  double ce = 0.0;
  double logits = 0.0;       // L_logits, 0 when its weight is 0
  double uncertainty = 0.0;  // L_{U_F}, 0 when its weight is 0
  double total = 0.0;
  double uf_student = 0.0;  // mean U_F over samples and elements
  double uf_teacher = 0.0;
  double uf_gap = 0.0;  // mean |U_F,s − U_F,t|
};

struct TeacherStudentPair {
  CasdModel teacher;
  CasdModel student;

  // Independent initializations drawn from separate substreams of `seed`.
  static TeacherStudentPair create(const EncoderConfig& cfg, std::uint64_t seed);
};

// CE-only training on complete samples.
std::vector<EpochLog> pretrain_teacher(CasdModel& teacher, const Dataset& data, const TrainConfig& cfg);

// Student learns from MRM-corrupted samples with CE + α·JS + β·uncertainty
// consistency against the teacher run on the complete samples.
std::vector<EpochLog> cotrain(CasdModel& student, CasdModel& teacher, const Dataset& data, const TrainConfig& cfg);

struct Condition {
  ModalityMask mask = ModalityMask::all();
  double p_intra = 0.0;

  std::string name() const;
};

// Student-only inference with s = u_F. Corruption noise for p_intra > 0 is
// drawn per sample from `seed`, so results are reproducible.
Metrics evaluate(const CasdModel& model, const Dataset& data, const Condition& condition,
                 const FusionOptions& fusion, std::uint64_t seed);

// Predicted class (first argmax of the logits) under inference mode.
std::size_t predict(const CasdModel& model, const ModalityInputs& x, const FusionOptions& fusion);

}  // namespace casd

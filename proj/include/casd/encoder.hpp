#pragma once

#include <array>
#include <string>
#include <vector>

#include "casd/evidist.hpp"
#include "casd/fusion.hpp"
#include "casd/modality.hpp"
#include "casd/random.hpp"
#include "casd/tape.hpp"

namespace casd {

struct EncoderConfig {
  std::array<std::size_t, kNumModalities> d_in{12, 8, 8};
  std::size_t d_model = 16;
  std::size_t seq_len = 16;
  std::size_t n_classes = 2;
};

void validate(const EncoderConfig& cfg);

// Additive floors on the softplus-mapped evidential parameters.
inline constexpr double kBetaFloor = 1e-4;
inline constexpr double kEvidenceFloor = 1e-3;
// α = kAlphaOffset + softplus(raw) + kEvidenceFloor. An offset of 2 keeps every
// v = 2α above 4, so the uncertainty factor v_F/(v_F−3) stays below 4.
inline constexpr double kAlphaOffset = 2.0;

// x [T×d_in] → conv1d (kernel 3) → residual single-head self-attention →
// evidential NIG head.
class ModalityEncoder {
 public:
  ModalityEncoder(const std::string& prefix, std::size_t d_in, std::size_t d_model, Rng& rng);

  // F + softmax(F Wq (F Wk)ᵀ/√d) F Wv Wo, with F = conv1d_same(x).
  // When `attention` is non-null it receives the [T×T] attention weights.
  Var encode(Tape& tape, Var x, Tensor* attention = nullptr) const;
  NIGNode evidential_head(Tape& tape, Var feat) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  std::size_t d_in() const { return conv_w_.value.dim(1); }
  std::size_t d_model() const { return conv_w_.value.dim(2); }

 private:
  Parameter conv_w_, conv_b_;
  Parameter wq_, wk_, wv_, wo_;
  Parameter gamma_w_, gamma_b_;
  Parameter beta_w_, beta_b_;
  Parameter delta_w_, delta_b_;
  Parameter alpha_w_, alpha_b_;
};

// logits = W·mean_pool(s) + b
class Classifier {
 public:
  Classifier(const std::string& prefix, std::size_t n_classes, std::size_t d_model, Rng& rng);

  Var classify(Tape& tape, Var s) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  Parameter w_, b_;
};

struct ForwardResult {
  std::array<NIGNode, kNumModalities> nig;
  FusedNode fused;
  Var representation;
  Var logits;
};

// Three modality encoders, confidence-aware fusion and the classifier. Teacher
// and student are two instances with independent parameters.
class CasdModel {
 public:
  CasdModel(const EncoderConfig& cfg, Rng& rng);

  ForwardResult forward(Tape& tape, const ModalityInputs& x, const FusionOptions& fusion, RepresentationMode mode,
                        NoiseSource* noise) const;

  const EncoderConfig& config() const { return cfg_; }
  const ModalityEncoder& encoder(std::size_t m) const { return encoders_[m]; }
  const Classifier& classifier() const { return classifier_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  EncoderConfig cfg_;
  std::array<ModalityEncoder, kNumModalities> encoders_;
  Classifier classifier_;
};

}  // namespace casd

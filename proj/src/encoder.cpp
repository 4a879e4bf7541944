#include "casd/encoder.hpp"

#include <cmath>

#include "casd/error.hpp"
#include "casd/ops.hpp"

namespace casd {

void validate(const EncoderConfig& cfg) {
  for (std::size_t d : cfg.d_in) {
    if (d == 0) fail(ErrorKind::kConfig, "modality input width must be positive");
  }
  if (cfg.d_model == 0) fail(ErrorKind::kConfig, "d_model must be positive");
  if (cfg.seq_len == 0) fail(ErrorKind::kConfig, "seq_len must be positive");
  if (cfg.n_classes < 2) fail(ErrorKind::kConfig, "n_classes must be at least 2");
}

namespace {

// Glorot-uniform in ±√(6/(fan_in+fan_out)).
Parameter glorot(std::string name, Shape shape, double fan_in, double fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = dist(rng);
  return {std::move(name), std::move(t)};
}

Parameter zeros(std::string name, Shape shape) { return {std::move(name), Tensor::zeros(std::move(shape))}; }

Var linear(Tape& tape, Var x, const Parameter& w, const Parameter& b) {
  return add_bias(matmul(x, tape.parameter(w)), tape.parameter(b));
}

}  // namespace

ModalityEncoder::ModalityEncoder(const std::string& prefix, std::size_t d_in, std::size_t d, Rng& rng)
    : conv_w_(glorot(prefix + ".conv_w", {3, d_in, d}, 3.0 * d_in, 3.0 * d, rng)),
      conv_b_(zeros(prefix + ".conv_b", {d})),
      wq_(glorot(prefix + ".w_q", {d, d}, d, d, rng)),
      wk_(glorot(prefix + ".w_k", {d, d}, d, d, rng)),
      wv_(glorot(prefix + ".w_v", {d, d}, d, d, rng)),
      wo_(glorot(prefix + ".w_o", {d, d}, d, d, rng)),
      gamma_w_(glorot(prefix + ".gamma_w", {d, d}, d, d, rng)),
      gamma_b_(zeros(prefix + ".gamma_b", {d})),
      beta_w_(glorot(prefix + ".beta_w", {d, d}, d, d, rng)),
      beta_b_(zeros(prefix + ".beta_b", {d})),
      delta_w_(glorot(prefix + ".delta_w", {d}, d, 1, rng)),
      delta_b_(zeros(prefix + ".delta_b", {1})),
      alpha_w_(glorot(prefix + ".alpha_w", {d}, d, 1, rng)),
      alpha_b_(zeros(prefix + ".alpha_b", {1})) {}

Var ModalityEncoder::encode(Tape& tape, Var x, Tensor* attention) const {
  if (x.value().rank() != 2 || x.value().dim(1) != d_in()) {
    fail(ErrorKind::kDimension, "encode: input " + shape_str(x.shape()) + " does not match d_in " +
                                    std::to_string(d_in()));
  }
  Var feat = conv1d_same(x, tape.parameter(conv_w_), tape.parameter(conv_b_));
  Var q = matmul(feat, tape.parameter(wq_));
  Var k = matmul(feat, tape.parameter(wk_));
  Var v = matmul(feat, tape.parameter(wv_));
  Var scores = matmul(q, transpose(k)) * (1.0 / std::sqrt(static_cast<double>(d_model())));
  Var weights = softmax(scores);
  if (attention) *attention = weights.value();
  Var attended = matmul(matmul(weights, v), tape.parameter(wo_));
  return feat + attended;
}

NIGNode ModalityEncoder::evidential_head(Tape& tape, Var feat) const {
  NIGNode p;
  p.gamma = linear(tape, feat, gamma_w_, gamma_b_);
  p.beta = softplus(linear(tape, feat, beta_w_, beta_b_)) + kBetaFloor;
  Var pooled = mean_pool(feat);
  Var delta_raw = sum(tape.parameter(delta_w_) * pooled) + tape.parameter(delta_b_);
  Var alpha_raw = sum(tape.parameter(alpha_w_) * pooled) + tape.parameter(alpha_b_);
  p.delta = softplus(delta_raw) + kEvidenceFloor;
  p.alpha = softplus(alpha_raw) + (kAlphaOffset + kEvidenceFloor);
  return p;
}

std::vector<Parameter*> ModalityEncoder::parameters() {
  return {&conv_w_, &conv_b_, &wq_,     &wk_,     &wv_,      &wo_,      &gamma_w_,
          &gamma_b_, &beta_w_, &beta_b_, &delta_w_, &delta_b_, &alpha_w_, &alpha_b_};
}

std::vector<const Parameter*> ModalityEncoder::parameters() const {
  auto ps = const_cast<ModalityEncoder*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

Classifier::Classifier(const std::string& prefix, std::size_t n_classes, std::size_t d_model, Rng& rng)
    : w_(glorot(prefix + ".w", {n_classes, d_model}, d_model, n_classes, rng)), b_(zeros(prefix + ".b", {n_classes})) {}

Var Classifier::classify(Tape& tape, Var s) const {
  std::size_t d = w_.value.dim(1);
  Var pooled = s.value().rank() == 2 ? mean_pool(s) : s;
  if (pooled.size() != d) {
    fail(ErrorKind::kDimension, "classify: representation " + shape_str(s.shape()) + " vs d_model " +
                                    std::to_string(d));
  }
  Var logits = matmul(tape.parameter(w_), reshape(pooled, {d, 1}));
  return add_bias(reshape(logits, {w_.value.dim(0)}), tape.parameter(b_));
}

std::vector<Parameter*> Classifier::parameters() { return {&w_, &b_}; }

std::vector<const Parameter*> Classifier::parameters() const { return {&w_, &b_}; }

CasdModel::CasdModel(const EncoderConfig& cfg, Rng& rng)
    : cfg_((validate(cfg), cfg)),
      encoders_{ModalityEncoder("enc_l", cfg.d_in[0], cfg.d_model, rng),
                ModalityEncoder("enc_a", cfg.d_in[1], cfg.d_model, rng),
                ModalityEncoder("enc_v", cfg.d_in[2], cfg.d_model, rng)},
      classifier_("cls", cfg.n_classes, cfg.d_model, rng) {}

ForwardResult CasdModel::forward(Tape& tape, const ModalityInputs& x, const FusionOptions& fusion,
                                 RepresentationMode mode, NoiseSource* noise) const {
  ForwardResult r;
  std::array<StudentTNode, kNumModalities> dists;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    const Tensor& xm = x[m];
    if (xm.rank() != 2 || xm.dim(0) != cfg_.seq_len || xm.dim(1) != cfg_.d_in[m]) {
      fail(ErrorKind::kDimension, std::string("forward: modality ") + kModalityLetters[m] + " has shape " +
                                      shape_str(xm.shape()));
    }
    Var feat = encoders_[m].encode(tape, tape.constant(xm));
    r.nig[m] = encoders_[m].evidential_head(tape, feat);
    dists[m] = nig_to_student(r.nig[m]);
  }
  r.fused = fuse(dists[0], dists[1], dists[2], fusion);
  r.representation = rrm_sample(r.fused, noise, mode);
  r.logits = classifier_.classify(tape, r.representation);
  return r;
}

std::vector<Parameter*> CasdModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& e : encoders_) {
    auto ps = e.parameters();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  auto ps = classifier_.parameters();
  out.insert(out.end(), ps.begin(), ps.end());
  return out;
}

std::vector<const Parameter*> CasdModel::parameters() const {
  auto ps = const_cast<CasdModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

}  // namespace casd

#include "casd/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "casd/error.hpp"
#include "casd/ops.hpp"

namespace casd {

namespace {

using Stream = TrainStream;

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, Stream stream, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {stream, epoch});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (double x : t.data()) s += x;
  return s / static_cast<double>(t.size());
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

[[noreturn]] void rethrow_with_context(const Error& e, const char* phase, std::size_t epoch, std::size_t step) {
  std::ostringstream os;
  os << phase << " epoch " << epoch << " step " << step << ": " << e.what();
  if (e.kind() == ErrorKind::kNumeric) os << " (last finite epoch: " << phase << " " << epoch - 1 << ")";
  throw Error(e.kind(), os.str());
}

RepresentationMode train_mode(const TrainConfig& cfg) {
  return cfg.rrm ? RepresentationMode::kTrain : RepresentationMode::kInfer;
}

struct CeStep {
  double loss = 0.0;
  double uf_sum = 0.0;  // Σ over the batch of the per-sample mean U_F
};

// One CE step of `model` on complete samples.
CeStep ce_step(CasdModel& model, SgdMomentum& opt, const Dataset& data, std::span<const std::size_t> batch,
               const TrainConfig& cfg, NoiseSource& noise) {
  Tape tape;
  Var loss;
  CeStep out;
  for (std::size_t idx : batch) {
    const Sample& s = data.samples[idx];
    ForwardResult r = model.forward(tape, s.x, cfg.fusion, train_mode(cfg), &noise);
    out.uf_sum += mean_of(r.fused.uncertainty.value());
    Var ce = ce_loss(r.logits, s.label);
    loss = loss.valid() ? loss + ce : ce;
  }
  loss = loss * (1.0 / static_cast<double>(batch.size()));
  opt.step(tape.backward(loss));
  out.loss = loss.value().item();
  return out;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be positive");
  if (!(cfg.optimizer.learning_rate > 0.0)) fail(ErrorKind::kConfig, "learning_rate must be positive");
  if (!(cfg.optimizer.momentum >= 0.0 && cfg.optimizer.momentum < 1.0)) {
    fail(ErrorKind::kConfig, "momentum must lie in [0, 1)");
  }
  validate(cfg.loss);
  validate(cfg.mrm);
}

SgdMomentum::SgdMomentum(std::vector<Parameter*> params, const OptimizerConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (Parameter* p : params_) velocity_.push_back(Tensor::zeros(p->value.shape()));
}

double SgdMomentum::step(const Gradients& grads) {
  std::vector<Tensor> g;
  g.reserve(params_.size());
  double sq = 0.0;
  for (Parameter* p : params_) {
    g.push_back(grads.of(*p));
    for (double x : g.back().data()) sq += x * x;
  }
  double norm = std::sqrt(sq);
  double factor = (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& vel = velocity_[k];
    Tensor& value = params_[k]->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      vel[i] = cfg_.momentum * vel[i] + factor * g[k][i];
      value[i] -= cfg_.learning_rate * vel[i];
    }
  }
  return norm;
}

TeacherStudentPair TeacherStudentPair::create(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng teacher_rng = make_rng(seed, {kTeacherInit});
  Rng student_rng = make_rng(seed, {kStudentInit});
  return {CasdModel(cfg, teacher_rng), CasdModel(cfg, student_rng)};
}

std::vector<EpochLog> pretrain_teacher(CasdModel& teacher, const Dataset& data, const TrainConfig& cfg) {
  validate(cfg);
  if (data.samples.empty()) fail(ErrorKind::kData, "pretrain_teacher: empty training set");
  SgdMomentum opt(teacher.parameters(), cfg.optimizer);
  Rng noise_rng = make_rng(cfg.seed, {kTeacherNoise});
  NoiseSource noise(noise_rng);
  std::vector<EpochLog> logs;
  for (std::size_t epoch = 1; epoch <= cfg.epochs_teacher; ++epoch) {
    auto order = epoch_order(data.samples.size(), cfg.seed, kTeacherShuffle, epoch);
    double ce_sum = 0.0, uf_sum = 0.0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      std::span<const std::size_t> batch(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      try {
        CeStep r = ce_step(teacher, opt, data, batch, cfg, noise);
        ce_sum += r.loss * static_cast<double>(batch.size());
        uf_sum += r.uf_sum;
      } catch (const Error& e) {
        rethrow_with_context(e, "teacher", epoch, step);
      }
    }
    EpochLog log;
    log.phase = "teacher";
    log.epoch = epoch;
    log.ce = ce_sum / static_cast<double>(order.size());
    log.total = log.ce;
    log.uf_teacher = uf_sum / static_cast<double>(order.size());
    logs.push_back(log);
  }
  return logs;
}

std::vector<EpochLog> cotrain(CasdModel& student, CasdModel& teacher, const Dataset& data, const TrainConfig& cfg) {
  validate(cfg);
  if (data.samples.empty()) fail(ErrorKind::kData, "cotrain: empty training set");
  SgdMomentum opt(student.parameters(), cfg.optimizer);
  std::optional<SgdMomentum> teacher_opt;
  if (!cfg.freeze_teacher) teacher_opt.emplace(teacher.parameters(), cfg.optimizer);

  Rng corrupt_rng = make_rng(cfg.seed, {kCorruption});
  Rng noise_rng = make_rng(cfg.seed, {kStudentNoise});
  Rng teacher_noise_rng = make_rng(cfg.seed, {kTeacherFinetuneNoise});
  NoiseSource noise(noise_rng);
  NoiseSource teacher_noise(teacher_noise_rng);
  const bool use_logits = cfg.loss.alpha > 0.0;
  const bool use_uncertainty = cfg.loss.beta > 0.0;

  std::vector<EpochLog> logs;
  for (std::size_t epoch = 1; epoch <= cfg.epochs_cotrain; ++epoch) {
    auto order = epoch_order(data.samples.size(), cfg.seed, kCotrainShuffle, epoch);
    EpochLog log;
    log.phase = "cotrain";
    log.epoch = epoch;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      std::span<const std::size_t> batch(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      double inv = 1.0 / static_cast<double>(batch.size());
      try {
        Tape tape;
        Var ce_sum, js_sum, uc_sum;
        for (std::size_t idx : batch) {
          const Sample& s = data.samples[idx];
          Tape teacher_tape(GradMode::kDisabled);
          ForwardResult t =
              teacher.forward(teacher_tape, s.x, cfg.fusion, RepresentationMode::kInfer, nullptr);
          Sample corrupted = mrm_corrupt(s, cfg.mrm, corrupt_rng);
          ForwardResult r = student.forward(tape, corrupted.x, cfg.fusion, train_mode(cfg), &noise);

          Var ce = ce_loss(r.logits, s.label);
          ce_sum = ce_sum.valid() ? ce_sum + ce : ce;
          if (use_logits) {
            Var js = js_logits_loss(r.logits, tape.constant(t.logits.value()), cfg.loss.temperature);
            js_sum = js_sum.valid() ? js_sum + js : js;
          }
          const Tensor& u_s = r.fused.uncertainty.value();
          const Tensor& u_t = t.fused.uncertainty.value();
          if (use_uncertainty) {
            Var uc = uncertainty_consistency_loss(r.fused.uncertainty, tape.constant(u_t));
            uc_sum = uc_sum.valid() ? uc_sum + uc : uc;
          }
          log.uf_student += mean_of(u_s);
          log.uf_teacher += mean_of(u_t);
          log.uf_gap += mean_abs_diff(u_s, u_t);
        }
        Var zero = tape.constant(Tensor::scalar(0.0));
        Var ce = ce_sum * inv;
        Var js = use_logits ? js_sum * inv : zero;
        Var uc = use_uncertainty ? uc_sum * inv : zero;
        Var total = total_loss(ce, js, uc, cfg.loss);
        opt.step(tape.backward(total));

        double w = static_cast<double>(batch.size());
        log.ce += ce.value().item() * w;
        log.logits += js.value().item() * w;
        log.uncertainty += uc.value().item() * w;
        log.total += total.value().item() * w;

        if (teacher_opt) ce_step(teacher, *teacher_opt, data, batch, cfg, teacher_noise);
      } catch (const Error& e) {
        rethrow_with_context(e, "cotrain", epoch, step);
      }
    }
    double n = static_cast<double>(order.size());
    for (double* f : {&log.ce, &log.logits, &log.uncertainty, &log.total, &log.uf_student, &log.uf_teacher,
                      &log.uf_gap}) {
      *f /= n;
    }
    logs.push_back(log);
  }
  return logs;
}

std::string Condition::name() const {
  if (p_intra <= 0.0) return mask.name();
  std::ostringstream os;
  os << mask.name() << "@p=" << p_intra;
  return os.str();
}

std::size_t predict(const CasdModel& model, const ModalityInputs& x, const FusionOptions& fusion) {
  Tape tape(GradMode::kDisabled);
  ForwardResult r = model.forward(tape, x, fusion, RepresentationMode::kInfer, nullptr);
  auto logits = r.logits.value().data();
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

Metrics evaluate(const CasdModel& model, const Dataset& data, const Condition& condition,
                 const FusionOptions& fusion, std::uint64_t seed) {
  if (data.samples.empty()) fail(ErrorKind::kData, "evaluate: empty test set");
  if (condition.mask.empty()) fail(ErrorKind::kUsage, "evaluate: condition has no available modality");
  std::vector<std::size_t> labels, preds;
  labels.reserve(data.samples.size());
  preds.reserve(data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    Rng rng = make_rng(seed, {kEvalCorruption, i});
    ModalityInputs x = apply_condition(s.x, condition.mask, condition.p_intra, rng);
    labels.push_back(s.label);
    preds.push_back(predict(model, x, fusion));
  }
  return compute_metrics(labels, preds, model.config().n_classes);
}

}  // namespace casd

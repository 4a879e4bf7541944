#include "casd/gradcheck_suite.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <memory>
#include <random>

#include "casd/error.hpp"
#include "casd/evidist.hpp"
#include "casd/fusion.hpp"
#include "casd/losses.hpp"
#include "casd/mrm.hpp"
#include "casd/ops.hpp"

namespace casd {

namespace {

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = dist(rng);
  return t;
}

// Magnitudes in [lo, hi] with random signs; keeps inputs off kinks at 0.
Tensor signed_away_from_zero(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t = uniform(std::move(shape), lo, hi, rng);
  std::bernoulli_distribution flip(0.5);
  for (double& x : t.data()) {
    if (flip(rng)) x = -x;
  }
  return t;
}

// sum(v ⊙ R) with a fixed pseudo-random R, so every output entry reaches the loss
// with a distinct weight.
Var project(Var v, std::uint64_t tag) {
  Rng rng = make_rng(0x5eed, {tag, v.size()});
  Tensor r = uniform(v.shape(), -1.0, 1.0, rng);
  return sum(v * v.tape().constant(std::move(r)));
}

Var project(const StudentTNode& d, std::uint64_t tag) {
  return project(d.u, tag) + project(d.o, tag + 1) + project(d.v, tag + 2);
}

struct Case {
  std::string name;
  std::vector<Parameter> params;
  // Receives the leaves of `params` in order and returns a scalar loss.
  std::function<Var(Tape&, const std::vector<Var>&)> loss;
  // Model-owned parameters the loss reaches on its own; checked as well.
  std::vector<Parameter*> external = {};
};

GradCheckEntry run(Case& c) {
  std::vector<Parameter*> ptrs;
  for (Parameter& p : c.params) ptrs.push_back(&p);
  ptrs.insert(ptrs.end(), c.external.begin(), c.external.end());
  LossBuilder builder = [&c](Tape& tape) {
    std::vector<Var> leaves;
    for (const Parameter& p : c.params) leaves.push_back(tape.parameter(p));
    return c.loss(tape, leaves);
  };
  return {c.name, grad_check(builder, ptrs, kGradCheckEpsilon)};
}

Parameter param(std::string name, Tensor value) { return {std::move(name), std::move(value)}; }

std::vector<Case> primitive_cases(Rng& rng) {
  std::vector<Case> cases;
  auto unary_case = [&](const char* name, Var (*op)(Var), Tensor x) {
    cases.push_back({name, {param("x", std::move(x))}, [op](Tape&, const std::vector<Var>& p) {
                       return project(op(p[0]), 1);
                     }});
  };

  cases.push_back({"matmul",
                   {param("a", uniform({3, 5}, -1, 1, rng)), param("b", uniform({5, 4}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(matmul(p[0], p[1]), 1); }});
  unary_case("transpose", transpose, uniform({4, 6}, -1, 1, rng));
  cases.push_back({"reshape", {param("x", uniform({4, 6}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(reshape(p[0], {3, 8}), 1); }});
  for (auto [name, op] : {std::pair{"add", add}, std::pair{"sub", sub}, std::pair{"mul", mul}}) {
    cases.push_back({name,
                     {param("a", uniform({5, 5}, -1, 1, rng)), param("b", uniform({5, 5}, -1, 1, rng))},
                     [op](Tape&, const std::vector<Var>& p) { return project(op(p[0], p[1]), 1); }});
  }
  cases.push_back({"mul (scalar broadcast)",
                   {param("a", uniform({4, 3}, -1, 1, rng)), param("s", uniform({1}, 0.5, 2, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(p[1] * p[0], 1); }});
  cases.push_back({"div",
                   {param("a", uniform({5, 5}, -1, 1, rng)), param("b", signed_away_from_zero({5, 5}, 0.5, 2, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(div(p[0], p[1]), 1); }});
  cases.push_back({"add_bias",
                   {param("x", uniform({6, 4}, -1, 1, rng)), param("b", uniform({4}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(add_bias(p[0], p[1]), 1); }});
  cases.push_back({"scale", {param("x", uniform({3, 7}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(scale(p[0], -1.7), 1); }});
  cases.push_back({"add_scalar", {param("x", uniform({7}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(add_scalar(p[0], 0.4), 1); }});
  unary_case("neg", neg, uniform({8}, -1, 1, rng));
  unary_case("exp", exp, uniform({4, 4}, -1, 1, rng));
  unary_case("log", log, uniform({4, 4}, 0.5, 2, rng));
  unary_case("sqrt", sqrt, uniform({4, 4}, 0.5, 2, rng));
  unary_case("square", square, uniform({4, 4}, -1, 1, rng));
  unary_case("softplus", softplus, uniform({8, 8}, -3, 3, rng));
  cases.push_back({"clamp_min", {param("x", signed_away_from_zero({6, 6}, 0.1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(clamp_min(p[0], 0.0), 1); }});
  cases.push_back({"minimum",
                   {param("a", Tensor::scalar(0.9)), param("b", Tensor::scalar(0.3)), param("c", Tensor::scalar(1.6))},
                   [](Tape&, const std::vector<Var>& p) { return project(minimum(p), 1); }});
  cases.push_back({"sum", {param("x", uniform({5, 3}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return sum(square(p[0])); }});
  cases.push_back({"mean", {param("x", uniform({5, 3}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(mean(p[0]), 1); }});
  unary_case("mean_pool", mean_pool, uniform({8, 5}, -1, 1, rng));
  cases.push_back({"conv1d_same",
                   {param("x", uniform({8, 3}, -1, 1, rng)), param("w", uniform({3, 3, 4}, -1, 1, rng)),
                    param("b", uniform({4}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(conv1d_same(p[0], p[1], p[2]), 1); }});
  cases.push_back({"softmax", {param("x", uniform({4, 6}, -2, 2, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(softmax(p[0], 0.7), 1); }});
  unary_case("log_softmax", log_softmax, uniform({6}, -2, 2, rng));
  cases.push_back({"pick", {param("x", uniform({6}, -1, 1, rng))},
                   [](Tape&, const std::vector<Var>& p) { return project(pick(exp(p[0]), 2), 1); }});
  cases.push_back({"kl_div",
                   {param("a", uniform({5}, -2, 2, rng)), param("b", uniform({5}, -2, 2, rng))},
                   [](Tape&, const std::vector<Var>& p) { return kl_div(softmax(p[0]), softmax(p[1])); }});
  return cases;
}

// Positive-valued Student-t parameters with well separated dofs.
Case fusion_case(const char* name, bool with_rrm, Rng& rng) {
  std::vector<Parameter> params;
  const double dofs[3] = {6.5, 4.5, 8.0};
  for (int m = 0; m < 3; ++m) {
    params.push_back(param("u" + std::to_string(m), uniform({4, 3}, -1, 1, rng)));
    params.push_back(param("o" + std::to_string(m), uniform({4, 3}, 0.5, 2, rng)));
    params.push_back(param("v" + std::to_string(m), Tensor::scalar(dofs[m])));
  }
  Rng noise_rng = make_rng(7, {1});
  std::vector<Tensor> draws{sample_standard_t({4, 3}, 4.5, noise_rng)};
  return {name, std::move(params), [with_rrm, draws](Tape&, const std::vector<Var>& p) {
            StudentTNode d[3];
            for (int m = 0; m < 3; ++m) d[m] = {p[3 * m], p[3 * m + 1], p[3 * m + 2]};
            FusedNode f = fuse(d[0], d[1], d[2]);
            if (with_rrm) {
              NoiseSource replay = NoiseSource::replay(draws);
              return project(rrm_sample(f, &replay, RepresentationMode::kTrain), 1);
            }
            return project(f.u, 1) + project(f.sigma, 2) + project(f.uncertainty, 3) + project(f.weights[0], 4) +
                   project(f.weights[1], 5) + project(f.weights[2], 6) + project(f.v, 7);
          }};
}

std::vector<Case> composite_cases(Rng& rng) {
  std::vector<Case> cases;

  auto encoder = std::make_shared<ModalityEncoder>("enc", 4, 6, rng);
  Tensor x = uniform({5, 4}, -1, 1, rng);
  cases.push_back({"attention_encoder", {param("x", x)},
                   [encoder](Tape& tape, const std::vector<Var>& p) { return project(encoder->encode(tape, p[0]), 1); },
                   encoder->parameters()});
  cases.push_back({"evidential_head", {param("x", x)},
                   [encoder](Tape& tape, const std::vector<Var>& p) {
                     NIGNode n = encoder->evidential_head(tape, encoder->encode(tape, p[0]));
                     return project(n.gamma, 1) + project(n.beta, 2) + project(n.delta, 3) + project(n.alpha, 4);
                   },
                   encoder->parameters()});

  std::vector<Parameter> nig{param("gamma", uniform({4, 3}, -1, 1, rng)), param("beta", uniform({4, 3}, 0.5, 2, rng)),
                             param("delta", Tensor::scalar(0.8)), param("alpha", Tensor::scalar(2.6))};
  cases.push_back({"nig_to_student", nig, [](Tape&, const std::vector<Var>& p) {
                     return project(nig_to_student(NIGNode{p[0], p[1], p[2], p[3]}), 1);
                   }});
  cases.push_back({"aleatoric_epistemic", nig, [](Tape&, const std::vector<Var>& p) {
                     NIGNode n{p[0], p[1], p[2], p[3]};
                     return project(aleatoric(n), 1) + project(epistemic(n), 2);
                   }});
  cases.push_back(fusion_case("fuse", false, rng));
  cases.push_back(fusion_case("rrm_sample", true, rng));
  cases.push_back({"ce_loss", {param("logits", uniform({3}, -2, 2, rng))},
                   [](Tape&, const std::vector<Var>& p) { return ce_loss(p[0], 1); }});
  Tensor teacher_logits = uniform({3}, -2, 2, rng);
  cases.push_back({"js_logits_loss", {param("logits", uniform({3}, -2, 2, rng))},
                   [teacher_logits](Tape& tape, const std::vector<Var>& p) {
                     return js_logits_loss(p[0], tape.constant(teacher_logits), 1.5);
                   }});
  Tensor teacher_u = uniform({4, 3}, 0.5, 2, rng);
  cases.push_back({"uncertainty_consistency", {param("u", uniform({4, 3}, 0.5, 2, rng))},
                   [teacher_u](Tape& tape, const std::vector<Var>& p) {
                     return uncertainty_consistency_loss(p[0], tape.constant(teacher_u));
                   }});
  return cases;
}

}  // namespace

std::vector<GradCheckEntry> check_primitives(std::uint64_t seed) {
  Rng rng = make_rng(seed, {60});
  std::vector<Case> cases = primitive_cases(rng);
  std::vector<Case> composite = composite_cases(rng);
  cases.insert(cases.end(), std::make_move_iterator(composite.begin()), std::make_move_iterator(composite.end()));
  std::vector<GradCheckEntry> out;
  for (Case& c : cases) out.push_back(run(c));
  return out;
}

GradCheckEntry check_end_to_end(const EncoderConfig& model, const TrainConfig& train, std::uint64_t seed) {
  validate(train);
  TeacherStudentPair pair = TeacherStudentPair::create(model, seed);
  Rng rng = make_rng(seed, {61});
  Sample sample, corrupted;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t draw = 0;; ++draw) {
    if (draw == kMaxEvaluationDraws) fail(ErrorKind::kNumeric, "check_end_to_end: every draw sits on a dof tie");
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      sample.x[m] = Tensor({model.seq_len, model.d_in[m]});
      for (double& v : sample.x[m].data()) v = normal(rng);
    }
    sample.label = rng() % model.n_classes;
    corrupted = mrm_corrupt(sample, train.mrm, rng);
    Tape probe(GradMode::kDisabled);
    ForwardResult r = pair.student.forward(probe, corrupted.x, train.fusion, RepresentationMode::kInfer, nullptr);
    std::array<double, kNumModalities> dof;
    for (std::size_t m = 0; m < kNumModalities; ++m) dof[m] = 2.0 * r.nig[m].alpha.value().item();
    std::sort(dof.begin(), dof.end());
    if (dof[1] - dof[0] > kDofTieMargin) break;
  }
  const RepresentationMode mode = train.rrm ? RepresentationMode::kTrain : RepresentationMode::kInfer;

  Tape teacher_tape(GradMode::kDisabled);
  ForwardResult t = pair.teacher.forward(teacher_tape, sample.x, train.fusion, RepresentationMode::kInfer, nullptr);
  Tensor teacher_logits = t.logits.value();
  Tensor teacher_u = t.fused.uncertainty.value();

  Rng noise_rng = make_rng(seed, {62});
  NoiseSource live(noise_rng);
  {
    Tape probe(GradMode::kDisabled);
    pair.student.forward(probe, corrupted.x, train.fusion, mode, &live);
  }
  std::vector<Tensor> draws = live.recorded();

  const CasdModel& student = pair.student;
  LossBuilder loss = [&](Tape& tape) {
    NoiseSource replay = NoiseSource::replay(draws);
    ForwardResult r = student.forward(tape, corrupted.x, train.fusion, mode, &replay);
    Var ce = ce_loss(r.logits, sample.label);
    Var js = js_logits_loss(r.logits, tape.constant(teacher_logits), train.loss.temperature);
    Var uc = uncertainty_consistency_loss(r.fused.uncertainty, tape.constant(teacher_u));
    return total_loss(ce, js, uc, train.loss);
  };
  return {"end_to_end", grad_check(loss, pair.student.parameters(), kGradCheckEpsilon)};
}

}  // namespace casd

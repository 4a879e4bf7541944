#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "casd/checkpoint.hpp"
#include "casd/config.hpp"
#include "casd/error.hpp"
#include "casd/experiment.hpp"
#include "casd/metrics.hpp"
#include "casd/mrm.hpp"
#include "casd/ops.hpp"
#include "casd/train.hpp"

using namespace casd;

namespace {

RunConfig small_run(std::uint64_t seed = 0) {
  RunConfig rc;
  rc.seed = seed;
  rc.data.n_train = 32;
  rc.data.n_val = 8;
  rc.data.n_test = 24;
  rc.data.seq_len = 5;
  rc.data.d_in = {3, 2, 2};
  rc.data.prototype_scale = 0.5;
  rc.d_model = 4;
  rc.train.epochs_teacher = 3;
  rc.train.epochs_cotrain = 3;
  rc.train.batch_size = 8;
  return rc;
}

std::vector<Tensor> snapshot(const CasdModel& m) {
  std::vector<Tensor> out;
  for (const Parameter* p : m.parameters()) out.push_back(p->value);
  return out;
}

Sample ramp_sample(std::size_t T, std::array<std::size_t, 3> d, std::size_t label) {
  Sample s;
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    s.x[m] = Tensor({T, d[m]});
    for (std::size_t i = 0; i < s.x[m].size(); ++i) s.x[m][i] = 1.0 + static_cast<double>(i % 7);
  }
  s.label = label;
  return s;
}

// Missing-modality CE training written without the distillation machinery,
// drawing from the same streams cotrain uses.
void standalone_ce(CasdModel& model, const Dataset& data, const TrainConfig& cfg) {
  SgdMomentum opt(model.parameters(), cfg.optimizer);
  Rng corrupt_rng = make_rng(cfg.seed, {kCorruption});
  Rng noise_rng = make_rng(cfg.seed, {kStudentNoise});
  NoiseSource noise(noise_rng);
  for (std::size_t epoch = 1; epoch <= cfg.epochs_cotrain; ++epoch) {
    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = make_rng(cfg.seed, {kCotrainShuffle, epoch});
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      Var sum;
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = data.samples[order[i]];
        Sample c = mrm_corrupt(s, cfg.mrm, corrupt_rng);
        Var ce = ce_loss(model.forward(tape, c.x, cfg.fusion, RepresentationMode::kTrain, &noise).logits, s.label);
        sum = sum.valid() ? sum + ce : ce;
      }
      opt.step(tape.backward(sum * (1.0 / static_cast<double>(end - start))));
    }
  }
}

}  // namespace

TEST_CASE("MRM contract") {
  MrmConfig cfg;
  Rng rng = make_rng(1);
  Sample s = ramp_sample(6, {3, 2, 2}, 1);

  SUBCASE("p = 0 with the full mask is the identity") {
    cfg.p_intra = 0.0;
    cfg.inter_patterns = {ModalityMask::all()};
    Sample c = mrm_corrupt(s, cfg, rng);
    for (std::size_t m = 0; m < kNumModalities; ++m) CHECK(c.x[m] == s.x[m]);
    CHECK(c.label == 1);
  }
  SUBCASE("p = 1 zeroes every frame") {
    cfg.p_intra = 1.0;
    for (int i = 0; i < 20; ++i) {
      Sample c = mrm_corrupt(s, cfg, rng);
      for (std::size_t m = 0; m < kNumModalities; ++m) CHECK(c.x[m] == Tensor::zeros(s.x[m].shape()));
      CHECK(c.label == 1);
    }
  }
  SUBCASE("p = 0.5 over 10000 frames drops close to half") {
    Sample big = ramp_sample(10000, {1, 1, 1}, 0);
    cfg.p_intra = 0.5;
    cfg.inter_patterns = {ModalityMask(0b001)};
    Sample c = mrm_corrupt(big, cfg, rng);
    std::size_t zeroed = 0;
    for (double x : c.x[0].data()) zeroed += x == 0.0;
    double frac = static_cast<double>(zeroed) / 10000.0;
    CHECK(frac >= 0.48);
    CHECK(frac <= 0.52);
    CHECK(c.x[1] == Tensor::zeros({10000, 1}));
    CHECK(c.x[2] == Tensor::zeros({10000, 1}));
  }
  SUBCASE("dropped frames are whole rows and kept frames are untouched") {
    cfg.p_intra = 0.4;
    cfg.inter_patterns = {ModalityMask::all()};
    Sample c = mrm_corrupt(s, cfg, rng);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      for (std::size_t t = 0; t < 6; ++t) {
        auto got = c.x[m].row(t), orig = s.x[m].row(t);
        bool zero = std::all_of(got.begin(), got.end(), [](double x) { return x == 0.0; });
        bool same = std::equal(got.begin(), got.end(), orig.begin());
        CHECK((zero || same));
      }
    }
  }
  SUBCASE("patterns are drawn uniformly and the draw is seeded") {
    cfg.p_intra = 0.0;
    std::array<int, 8> counts{};
    for (int i = 0; i < 7000; ++i) {
      Sample c = mrm_corrupt(s, cfg, rng);
      std::uint8_t bits = 0;
      for (std::size_t m = 0; m < kNumModalities; ++m) bits |= (c.x[m] == s.x[m] ? 1 : 0) << m;
      ++counts[bits];
    }
    CHECK(counts[0] == 0);
    for (int b = 1; b < 8; ++b) CHECK(std::abs(counts[b] - 1000) < 120);
    Rng r1 = make_rng(5), r2 = make_rng(5);
    cfg.p_intra = 0.3;
    CHECK(mrm_corrupt(s, cfg, r1).x[0] == mrm_corrupt(s, cfg, r2).x[0]);
  }
  SUBCASE("invalid configs") {
    cfg.p_intra = 1.5;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.p_intra = 0.2;
    cfg.inter_patterns = {ModalityMask(0)};
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.inter_patterns = {};
    CHECK_THROWS_AS(validate(cfg), Error);
  }
}

TEST_CASE("SGD with momentum and clipping") {
  Parameter p{"p", Tensor::vector({1.0, 2.0})};
  OptimizerConfig oc{0.1, 0.5, 0.0};
  SgdMomentum opt({&p}, oc);
  Tape tape;
  Gradients g = tape.backward(sum(tape.parameter(p) * tape.constant(Tensor::vector({3.0, 4.0}))));
  CHECK(opt.step(g) == 5.0);
  CHECK(std::abs(p.value[0] - 0.7) <= 1e-15);
  CHECK(std::abs(p.value[1] - 1.6) <= 1e-15);
  opt.step(g);  // velocity 0.5·3 + 3 = 4.5
  CHECK(std::abs(p.value[0] - (0.7 - 0.45)) <= 1e-15);

  Parameter q{"q", Tensor::vector({0.0, 0.0})};
  SgdMomentum clipped({&q}, {1.0, 0.0, 1.0});
  Tape t2;
  clipped.step(t2.backward(sum(t2.parameter(q) * t2.constant(Tensor::vector({3.0, 4.0})))));
  CHECK(std::abs(q.value[0] + 0.6) <= 1e-15);
  CHECK(std::abs(q.value[1] + 0.8) <= 1e-15);
}

TEST_CASE("teacher pretraining") {
  RunConfig rc = small_run();
  DatasetSplits data = generate(rc.synthetic_spec());
  TeacherStudentPair pair = TeacherStudentPair::create(rc.encoder_config(), 0);

  TrainConfig zero = rc.train_config();
  zero.epochs_teacher = 0;
  auto before = snapshot(pair.teacher);
  CHECK(pretrain_teacher(pair.teacher, data.train, zero).empty());
  CHECK(snapshot(pair.teacher) == before);

  auto log = pretrain_teacher(pair.teacher, data.train, rc.train_config());
  REQUIRE(log.size() == 3);
  CHECK(log[0].phase == "teacher");
  CHECK(log[2].epoch == 3);
  CHECK(snapshot(pair.teacher) != before);
  CHECK(std::isfinite(log[2].uf_teacher));
  Dataset empty;
  CHECK_THROWS_AS(pretrain_teacher(pair.teacher, empty, rc.train_config()), Error);
}

TEST_CASE("teacher loss decreases early and the default task is learned") {
  RunConfig rc;
  DatasetSplits data = generate(rc.synthetic_spec());
  TeacherStudentPair pair = TeacherStudentPair::create(rc.encoder_config(), rc.seed);
  auto log = pretrain_teacher(pair.teacher, data.train, rc.train_config());
  REQUIRE(log.size() == rc.train.epochs_teacher);
  // Two-epoch moving averages over the first five epochs.
  for (std::size_t e = 0; e + 3 < 5; ++e) CHECK(log[e].ce + log[e + 1].ce > log[e + 2].ce + log[e + 3].ce);
  Metrics m = evaluate(pair.teacher, data.test, {}, rc.train.fusion, rc.eval_seed);
  CHECK(m.macro_f1 >= 0.90);
}

TEST_CASE("cotraining leaves a frozen teacher untouched and is deterministic") {
  RunConfig rc = small_run(3);
  DatasetSplits data = generate(rc.synthetic_spec());
  TeacherStudentPair pair = TeacherStudentPair::create(rc.encoder_config(), 3);
  pretrain_teacher(pair.teacher, data.train, rc.train_config());
  auto teacher_before = snapshot(pair.teacher);

  CasdModel a = pair.student, b = pair.student;
  auto log_a = cotrain(a, pair.teacher, data.train, rc.train_config());
  CHECK(snapshot(pair.teacher) == teacher_before);
  cotrain(b, pair.teacher, data.train, rc.train_config());
  CHECK(snapshot(a) == snapshot(b));

  REQUIRE(log_a.size() == 3);
  for (const EpochLog& e : log_a) {
    CHECK(e.phase == "cotrain");
    CHECK(e.logits > 0.0);
    CHECK(e.uncertainty > 0.0);
    CHECK(std::abs(e.total - (e.ce + e.logits + 0.1 * e.uncertainty)) <= 1e-9 * e.total);
    CHECK(e.uf_gap >= 0.0);
  }

  TrainConfig thaw = rc.train_config();
  thaw.freeze_teacher = false;
  CasdModel teacher = pair.teacher, c = pair.student;
  cotrain(c, teacher, data.train, thaw);
  CHECK(snapshot(teacher) != teacher_before);
}

TEST_CASE("zero distillation weights reduce cotraining to plain CE training") {
  RunConfig rc = small_run(4);
  DatasetSplits data = generate(rc.synthetic_spec());
  TeacherStudentPair pair = TeacherStudentPair::create(rc.encoder_config(), 4);
  pretrain_teacher(pair.teacher, data.train, rc.train_config());
  TrainConfig cfg = rc.train_config();
  cfg.loss.alpha = 0.0;
  cfg.loss.beta = 0.0;
  CasdModel via_cotrain = pair.student, via_ce = pair.student;
  auto log = cotrain(via_cotrain, pair.teacher, data.train, cfg);
  standalone_ce(via_ce, data.train, cfg);
  CHECK(snapshot(via_cotrain) == snapshot(via_ce));
  for (const EpochLog& e : log) {
    CHECK(e.logits == 0.0);
    CHECK(e.uncertainty == 0.0);
    CHECK(e.total == e.ce);
  }
}

TEST_CASE("divergence reports phase and epoch") {
  RunConfig rc = small_run();
  DatasetSplits data = generate(rc.synthetic_spec());
  TeacherStudentPair pair = TeacherStudentPair::create(rc.encoder_config(), 0);
  TrainConfig cfg = rc.train_config();
  cfg.optimizer.learning_rate = 1e12;
  cfg.optimizer.grad_clip = 0.0;
  try {
    pretrain_teacher(pair.teacher, data.train, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    std::string msg = e.what();
    CHECK(msg.find("teacher epoch ") != std::string::npos);
    CHECK(msg.find("last finite epoch") != std::string::npos);
  }
}

TEST_CASE("evaluation") {
  RunConfig rc = small_run(5);
  DatasetSplits data = generate(rc.synthetic_spec());
  TeacherStudentPair pair = TeacherStudentPair::create(rc.encoder_config(), 5);
  Condition noisy{ModalityMask(0b011), 0.5};
  Metrics a = evaluate(pair.student, data.test, noisy, {}, 9);
  Metrics b = evaluate(pair.student, data.test, noisy, {}, 9);
  CHECK(a.macro_f1 == b.macro_f1);
  CHECK(a.per_class_f1 == b.per_class_f1);
  CHECK(a.count == data.test.samples.size());
  CHECK(noisy.name() == "{l,a}@p=0.5");
  CHECK(Condition{}.name() == "{l,a,v}");
  CHECK_THROWS_AS(evaluate(pair.student, Dataset{}, {}, {}, 1), Error);
  CHECK_THROWS_AS(evaluate(pair.student, data.test, {ModalityMask(0), 0.0}, {}, 1), Error);
}

TEST_CASE("metrics") {
  std::vector<std::size_t> y{0, 0, 1, 1}, p{0, 1, 1, 1};
  Metrics m = compute_metrics(y, p, 2);
  CHECK(std::abs(m.per_class_f1[0] - 2.0 / 3.0) <= 1e-15);
  CHECK(std::abs(m.per_class_f1[1] - 0.8) <= 1e-15);
  CHECK(std::abs(m.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0) <= 1e-15);
  CHECK(m.accuracy == 0.75);
  std::vector<std::size_t> y2{0, 1, 1, 1}, p2{0, 1, 1, 0};
  Metrics w = compute_metrics(y2, p2, 2);
  // class 0: 2/(2+1) ; class 1: 4/(4+1); supports 1 and 3.
  CHECK(std::abs(w.weighted_f1 - (1.0 * 2.0 / 3.0 + 3.0 * 0.8) / 4.0) <= 1e-15);
  Metrics perfect = compute_metrics(y, y, 2);
  CHECK(perfect.macro_f1 == 1.0);
  std::vector<std::size_t> none{0, 0}, three{1, 1};
  CHECK(compute_metrics(none, three, 3).per_class_f1[2] == 0.0);
}

TEST_CASE("config files") {
  RunConfig rc = parse_config("# comment\nseed = 7\nalpha = 0.25\ninter_patterns = l la lav\nfusion = mean\n");
  CHECK(rc.seed == 7);
  CHECK(rc.train.loss.alpha == 0.25);
  CHECK(rc.train.mrm.inter_patterns.size() == 3);
  CHECK(rc.train.fusion.mode == FusionMode::kMean);
  CHECK(rc.train_config().seed == 7);
  CHECK(rc.synthetic_spec().seed == 7);

  RunConfig back = parse_config(format_config(rc));
  CHECK(format_config(back) == format_config(rc));
  CHECK(config_entries(rc).size() == config_keys().size());

  try {
    parse_config("seed = 1\nlearning_rat = 0.1\n", "run.cfg");
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("learning_rat") != std::string::npos);
    CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2\n"), Error);
  CHECK_THROWS_AS(parse_config("p_intra = 2\n"), Error);
  CHECK_THROWS_AS(parse_config("batch_size = x\n"), Error);
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("checkpoints round-trip exactly") {
  RunConfig rc = small_run(6);
  TeacherStudentPair pair = TeacherStudentPair::create(rc.encoder_config(), 6);
  std::string text = serialize_checkpoint(pair.student, rc, "student");
  Checkpoint ck = parse_checkpoint(text);
  CHECK(ck.role == "student");
  CHECK(format_config(ck.config) == format_config(rc));
  CasdModel loaded = load_model(ck);
  CHECK(snapshot(loaded) == snapshot(pair.student));
  CHECK(serialize_checkpoint(loaded, ck.config, "student") == text);

  RunConfig wider = rc;
  wider.d_model = 6;
  TeacherStudentPair other = TeacherStudentPair::create(wider.encoder_config(), 6);
  try {
    restore(other.student, ck);
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimension);
  }
  Checkpoint missing = ck;
  missing.tensors.pop_back();
  CHECK_THROWS_AS(restore(loaded, missing), Error);
  CHECK_THROWS_AS(parse_checkpoint("not a checkpoint\n"), Error);
}

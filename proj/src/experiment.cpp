#include "casd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "casd/error.hpp"

namespace casd {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::size_t job_limit() {
  if (const char* env = std::getenv("CASD_THREADS")) {
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ModalityMask> parse_conditions(const std::string& text) {
  std::vector<ModalityMask> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    if (token == "all") {
      auto partial = partial_masks();
      out.insert(out.end(), partial.begin(), partial.end());
      out.push_back(ModalityMask::all());
    } else {
      out.push_back(parse_mask(token));
    }
    token.clear();
  };
  for (char c : text) {
    if (c == ';' || c == ' ' || c == '\t') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  if (out.empty()) return parse_conditions("all");
  return out;
}

std::vector<EvalRow> evaluate_table(const CasdModel& model, const Dataset& test, const std::vector<ModalityMask>& masks,
                                    bool p_sweep, const FusionOptions& fusion, std::uint64_t eval_seed) {
  std::vector<EvalRow> rows;
  double partial_sum = 0.0;
  unsigned partial_seen = 0;
  const auto partial = partial_masks();
  for (ModalityMask m : masks) {
    Metrics metrics = evaluate(model, test, {m, 0.0}, fusion, eval_seed);
    for (std::size_t i = 0; i < partial.size(); ++i) {
      if (partial[i] == m && !(partial_seen & (1u << i))) {
        partial_seen |= 1u << i;
        partial_sum += metrics.macro_f1;
      }
    }
    rows.push_back({"condition", m.name(), 0.0, std::move(metrics)});
  }
  if (partial_seen == (1u << partial.size()) - 1) {
    EvalRow avg{"avg", "Avg.", 0.0, {}};
    avg.metrics.macro_f1 = partial_sum / static_cast<double>(partial.size());
    avg.metrics.count = test.samples.size();
    rows.push_back(std::move(avg));
  }
  if (p_sweep) {
    for (int k = 0; k <= 10; ++k) {
      double p = k / 10.0;
      rows.push_back({"p_sweep", ModalityMask::all().name(), p,
                      evaluate(model, test, {ModalityMask::all(), p}, fusion, eval_seed)});
    }
  }
  return rows;
}

double average_partial_f1(const CasdModel& model, const Dataset& test, const FusionOptions& fusion,
                          std::uint64_t eval_seed) {
  double total = 0.0;
  auto masks = partial_masks();
  for (ModalityMask m : masks) total += evaluate(model, test, {m, 0.0}, fusion, eval_seed).macro_f1;
  return total / static_cast<double>(masks.size());
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::string out = "section,condition,p_intra,macro_f1,weighted_f1,accuracy,count\n";
  for (const EvalRow& r : rows) {
    out += r.section + "," + csv_field(r.condition) + "," + format_double(r.p_intra) + "," +
           format_double(r.metrics.macro_f1) + ",";
    // The average row only carries macro F1.
    if (r.section != "avg") out += format_double(r.metrics.weighted_f1) + "," + format_double(r.metrics.accuracy);
    else out += ",";
    out += "," + std::to_string(r.metrics.count) + "\n";
  }
  return out;
}

TrainRun train_pair(const RunConfig& cfg, const Dataset& train) {
  validate(cfg);
  TrainConfig t = cfg.train_config();
  TeacherStudentPair pair = TeacherStudentPair::create(cfg.encoder_config(), cfg.seed);
  std::vector<EpochLog> log = pretrain_teacher(pair.teacher, train, t);
  std::vector<EpochLog> co = cotrain(pair.student, pair.teacher, train, t);
  log.insert(log.end(), co.begin(), co.end());
  return {std::move(pair.teacher), std::move(pair.student), std::move(log)};
}

std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "phase,epoch,ce,l_logits,l_uf,total,uf_student,uf_teacher,uf_gap\n";
  for (const EpochLog& e : log) {
    out += e.phase + "," + std::to_string(e.epoch);
    for (double x : {e.ce, e.logits, e.uncertainty, e.total, e.uf_student, e.uf_teacher, e.uf_gap}) {
      out += "," + format_double(x);
    }
    out += "\n";
  }
  return out;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline:
      return "baseline";
    case Variant::kConfidenceAware:
      return "+confidence-aware";
    case Variant::kUncertainty:
      return "+L_UF";
    case Variant::kRrm:
      return "+RRM";
  }
  return "?";
}

TrainConfig variant_config(const TrainConfig& full, Variant v) {
  TrainConfig t = full;
  t.rrm = v == Variant::kRrm;
  if (v == Variant::kBaseline) {
    t.fusion.mode = FusionMode::kMean;
    t.loss.alpha = 0.0;
  } else {
    t.fusion.mode = FusionMode::kConfidence;
  }
  if (v == Variant::kBaseline || v == Variant::kConfidenceAware) t.loss.beta = 0.0;
  return t;
}

SeedResult run_ablation_seed(const RunConfig& cfg, const DatasetSplits& data, std::uint64_t seed) {
  RunConfig c = cfg;
  c.seed = seed;
  validate(c);
  TrainConfig full = c.train_config();
  TeacherStudentPair pair = TeacherStudentPair::create(c.encoder_config(), seed);
  pretrain_teacher(pair.teacher, data.train, full);
  SeedResult result;
  result.seed = seed;
  for (Variant v : kVariants) {
    TrainConfig t = variant_config(full, v);
    CasdModel student = pair.student;
    std::vector<EpochLog> log = cotrain(student, pair.teacher, data.train, t);
    double avg = average_partial_f1(student, data.test, t.fusion, c.eval_seed);
    double full_f1 = evaluate(student, data.test, {}, t.fusion, c.eval_seed).macro_f1;
    result.variants.push_back({v, std::move(student), std::move(log), avg, full_f1});
  }
  return result;
}

std::vector<SeedResult> run_ablation(const RunConfig& cfg, const DataProvider& data, std::size_t max_jobs) {
  validate(cfg);
  const std::size_t n = cfg.ablation_seeds;
  std::vector<std::optional<SeedResult>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        std::uint64_t seed = cfg.seed + i;
        slots[i] = run_ablation_seed(cfg, data(seed), seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t jobs = std::min(std::max<std::size_t>(max_jobs, 1), n);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<SeedResult> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<AblationRow> summarize(const std::vector<SeedResult>& seeds) {
  if (seeds.empty()) fail(ErrorKind::kData, "summarize: no ablation runs");
  auto stats = [&](std::size_t k, bool full) {
    double n = static_cast<double>(seeds.size());
    double mean = 0.0;
    for (const SeedResult& s : seeds) mean += (full ? s.variants[k].full_f1 : s.variants[k].avg_f1) / n;
    double ss = 0.0;
    for (const SeedResult& s : seeds) {
      double d = (full ? s.variants[k].full_f1 : s.variants[k].avg_f1) - mean;
      ss += d * d;
    }
    return std::pair{mean, seeds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
  };
  std::vector<AblationRow> rows;
  for (std::size_t k = 0; k < kVariants.size(); ++k) {
    auto [am, as] = stats(k, false);
    auto [fm, fs] = stats(k, true);
    rows.push_back({kVariants[k], am, as, fm, fs});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,avg_f1_mean,avg_f1_std,full_f1_mean,full_f1_std\n";
  for (const AblationRow& r : rows) {
    out += csv_field(variant_name(r.variant)) + "," + format_double(r.avg_mean) + "," + format_double(r.avg_std) +
           "," + format_double(r.full_mean) + "," + format_double(r.full_std) + "\n";
  }
  return out;
}

std::string ablation_runs_csv(const std::vector<SeedResult>& seeds) {
  std::string out = "seed,variant,avg_f1,full_f1,uf_gap_first,uf_gap_last\n";
  for (const SeedResult& s : seeds) {
    for (const VariantResult& v : s.variants) {
      double first = v.log.empty() ? 0.0 : v.log.front().uf_gap;
      double last = v.log.empty() ? 0.0 : v.log.back().uf_gap;
      out += std::to_string(s.seed) + "," + csv_field(variant_name(v.variant)) + "," + format_double(v.avg_f1) + "," +
             format_double(v.full_f1) + "," + format_double(first) + "," + format_double(last) + "\n";
    }
  }
  return out;
}

}  // namespace casd

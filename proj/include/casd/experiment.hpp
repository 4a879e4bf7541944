#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "casd/config.hpp"
#include "casd/datagen.hpp"
#include "casd/train.hpp"

namespace casd {

// ---- condition tables ----

struct EvalRow {
  std::string section;  // "condition", "avg" or "p_sweep"
  std::string condition;
  double p_intra = 0.0;
  Metrics metrics;
};

// Parses a list of condition names separated by ';' or whitespace ("all" or
// empty selects the six partial masks plus the full set).
std::vector<ModalityMask> parse_conditions(const std::string& text);

// One row per mask, an "Avg." row over the six partial masks when all of
// them were requested, and, with `p_sweep`, full-mask rows for p = 0.0 … 1.0.
std::vector<EvalRow> evaluate_table(const CasdModel& model, const Dataset& test, const std::vector<ModalityMask>& masks,
                                    bool p_sweep, const FusionOptions& fusion, std::uint64_t eval_seed);

// Mean macro F1 over the six partial masks.
double average_partial_f1(const CasdModel& model, const Dataset& test, const FusionOptions& fusion,
                          std::uint64_t eval_seed);

std::string eval_csv(const std::vector<EvalRow>& rows);

// ---- training runs ----

struct TrainRun {
  CasdModel teacher;
  CasdModel student;
  std::vector<EpochLog> log;  // teacher epochs, then co-training epochs
};

TrainRun train_pair(const RunConfig& cfg, const Dataset& train);

std::string train_log_csv(const std::vector<EpochLog>& log);

// ---- ablation ----

// Cumulative component order: mean fusion without distillation, then
// confidence-aware fusion with logits distillation, then uncertainty
// distillation, then RRM sampling.
enum class Variant { kBaseline, kConfidenceAware, kUncertainty, kRrm };
inline constexpr std::array<Variant, 4> kVariants{Variant::kBaseline, Variant::kConfidenceAware,
                                                  Variant::kUncertainty, Variant::kRrm};

std::string variant_name(Variant v);
TrainConfig variant_config(const TrainConfig& full, Variant v);

struct VariantResult {
  Variant variant;
  CasdModel student;
  std::vector<EpochLog> log;
  double avg_f1 = 0.0;   // mean macro F1 over the six partial masks
  double full_f1 = 0.0;  // macro F1 with all modalities
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<VariantResult> variants;  // in kVariants order
};

// One teacher per seed, shared by the four students; every student starts
// from the same initialization.
SeedResult run_ablation_seed(const RunConfig& cfg, const DatasetSplits& data, std::uint64_t seed);

// Supplies the data for a seed; lets callers fix one dataset or draw one per seed.
using DataProvider = std::function<DatasetSplits(std::uint64_t seed)>;

// Seeds cfg.seed … cfg.seed + cfg.ablation_seeds − 1 as independent jobs on at
// most `max_jobs` threads. Results are ordered by seed regardless of scheduling.
std::vector<SeedResult> run_ablation(const RunConfig& cfg, const DataProvider& data, std::size_t max_jobs);

struct AblationRow {
  Variant variant;
  double avg_mean, avg_std, full_mean, full_std;
};

// Mean and sample standard deviation across seeds.
std::vector<AblationRow> summarize(const std::vector<SeedResult>& seeds);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_runs_csv(const std::vector<SeedResult>& seeds);

// ---- misc ----

// RFC-4180 field quoting.
std::string csv_field(const std::string& s);

// CASD_THREADS if set to a positive integer, else the hardware concurrency (≥ 1).
std::size_t job_limit();

}  // namespace casd

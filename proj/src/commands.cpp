#include "casd/commands.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "casd/checkpoint.hpp"
#include "casd/config.hpp"
#include "casd/error.hpp"
#include "casd/experiment.hpp"
#include "casd/gradcheck_suite.hpp"

namespace fs = std::filesystem;

namespace casd {

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

// Options shared by every subcommand. Flags win over the config file.
struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string data_dir;
  std::vector<std::string> overrides;  // key=value
  std::map<std::string, std::string> flag_values;
};

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const std::string& kv : o.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kUsage, "--set expects KEY=VALUE, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [key, value] : o.flag_values) set_config_value(cfg, key, value);
  if (o.seed) cfg.seed = *o.seed;
  validate(cfg);
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::kIo, "cannot create output directory " + dir.string());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Written before any computation and rewritten with artifact hashes at the end.
// The only file that carries timestamps.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& cfg, fs::path out_dir) : out_dir_(std::move(out_dir)) {
    json_["command"] = std::move(command);
    json_["seed"] = cfg.seed;
    json_["output_directory"] = out_dir_.string();
    json_["started_utc"] = utc_now();
    nlohmann::ordered_json c;
    for (const auto& [k, v] : config_entries(cfg)) c[k] = v;
    json_["config"] = std::move(c);
    json_["inputs"] = nlohmann::ordered_json::object();
    json_["artifacts"] = nlohmann::ordered_json::object();
    json_["status"] = "running";
    write();
  }

  void input(const fs::path& path) { json_["inputs"][path.string()] = sha256_file(path); }
  void artifact(const std::string& name) { json_["artifacts"][name] = sha256_file(out_dir_ / name); }

  void finish() {
    json_["status"] = "complete";
    json_["finished_utc"] = utc_now();
    write();
  }

 private:
  void write() { write_file(out_dir_ / "manifest.json", json_.dump(2) + "\n"); }

  fs::path out_dir_;
  nlohmann::ordered_json json_;
};

fs::path require_dir(const std::string& dir, const char* flag) {
  if (dir.empty()) fail(ErrorKind::kUsage, std::string(flag) + " is required");
  return dir;
}

Dataset load_split(const fs::path& data_dir, const char* split, const RunConfig& cfg) {
  fs::path path = data_dir / (std::string(split) + ".jsonl");
  if (!fs::exists(path)) fail(ErrorKind::kData, "missing dataset file " + path.string());
  Dataset d = load_jsonl(path, cfg.data_shape());
  d.split = split;
  return d;
}

int cmd_gen(const CommonOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  fs::path dir = require_dir(o.out_dir, "--out");
  ensure_dir(dir);
  Manifest manifest("gen", cfg, dir);
  DatasetSplits splits = generate(cfg.synthetic_spec());
  for (const Dataset* d : {&splits.train, &splits.val, &splits.test}) {
    std::string name = d->split + ".jsonl";
    save_jsonl(*d, dir / name);
    manifest.artifact(name);
    out << name << " " << d->samples.size() << "\n";
  }
  manifest.finish();
  return 0;
}

int cmd_train(const CommonOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  fs::path data_dir = require_dir(o.data_dir, "--data");
  fs::path dir = require_dir(o.out_dir, "--out");
  ensure_dir(dir);
  Manifest manifest("train", cfg, dir);
  Dataset train = load_split(data_dir, "train", cfg);
  manifest.input(data_dir / "train.jsonl");
  TrainRun run = train_pair(cfg, train);
  save_checkpoint(run.teacher, cfg, "teacher", dir / "teacher.ckpt");
  save_checkpoint(run.student, cfg, "student", dir / "student.ckpt");
  write_file(dir / "train_log.csv", train_log_csv(run.log));
  for (const char* name : {"teacher.ckpt", "student.ckpt", "train_log.csv"}) manifest.artifact(name);
  manifest.finish();
  const EpochLog& last = run.log.back();
  out << "trained " << cfg.train.epochs_teacher << " teacher + " << cfg.train.epochs_cotrain
      << " co-training epochs; final total loss " << format_double(last.total) << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& conditions, bool p_sweep,
             std::ostream& out) {
  if (checkpoint.empty()) fail(ErrorKind::kUsage, "--checkpoint is required");
  // Validate the selection before touching any file.
  std::vector<ModalityMask> masks = parse_conditions(conditions);
  Checkpoint ckpt = read_checkpoint(checkpoint);
  RunConfig cfg = ckpt.config;
  if (!o.config_path.empty() || !o.overrides.empty()) {
    RunConfig requested = resolve_config(o);
    EncoderConfig a = requested.encoder_config(), b = cfg.encoder_config();
    if (a.d_in != b.d_in || a.d_model != b.d_model || a.seq_len != b.seq_len || a.n_classes != b.n_classes) {
      fail(ErrorKind::kDimension, "checkpoint " + checkpoint + " was built for a different model shape than the config");
    }
    cfg.eval_seed = requested.eval_seed;
  }
  CasdModel model = load_model(ckpt);
  fs::path data_dir = require_dir(o.data_dir, "--data");
  std::optional<Manifest> manifest;
  fs::path dir = o.out_dir;
  if (!o.out_dir.empty()) {
    ensure_dir(dir);
    manifest.emplace("eval", cfg, dir);
  }
  Dataset test = load_split(data_dir, "test", cfg);
  if (manifest) {
    manifest->input(checkpoint);
    manifest->input(data_dir / "test.jsonl");
  }
  std::string csv = eval_csv(evaluate_table(model, test, masks, p_sweep, cfg.train.fusion, cfg.eval_seed));
  out << csv;
  if (manifest) {
    write_file(dir / "eval.csv", csv);
    manifest->artifact("eval.csv");
    manifest->finish();
  }
  return 0;
}

int cmd_ablate(const CommonOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  fs::path dir = require_dir(o.out_dir, "--out");
  ensure_dir(dir);
  Manifest manifest("ablate", cfg, dir);
  DataProvider provider;
  if (!o.data_dir.empty()) {
    fs::path data_dir = o.data_dir;
    DatasetSplits fixed;
    fixed.train = load_split(data_dir, "train", cfg);
    fixed.test = load_split(data_dir, "test", cfg);
    manifest.input(data_dir / "train.jsonl");
    manifest.input(data_dir / "test.jsonl");
    provider = [fixed](std::uint64_t) { return fixed; };
  } else {
    // One synthetic draw per seed.
    provider = [cfg](std::uint64_t seed) {
      SyntheticSpec spec = cfg.synthetic_spec();
      spec.seed = seed;
      return generate(spec);
    };
  }
  std::vector<SeedResult> runs = run_ablation(cfg, provider, job_limit());
  std::string table = ablation_csv(summarize(runs));
  write_file(dir / "ablation.csv", table);
  write_file(dir / "ablation_runs.csv", ablation_runs_csv(runs));
  manifest.artifact("ablation.csv");
  manifest.artifact("ablation_runs.csv");
  manifest.finish();
  out << table;
  return 0;
}

int cmd_gradcheck(const CommonOptions& o, const std::string& fault_op, double fault_factor, std::ostream& out) {
  RunConfig cfg = resolve_config(o);
  std::optional<Manifest> manifest;
  if (!o.out_dir.empty()) {
    ensure_dir(o.out_dir);
    manifest.emplace("gradcheck", cfg, o.out_dir);
  }
  std::optional<ScopedBackwardFault> fault;
  if (!fault_op.empty()) fault.emplace(fault_op, fault_factor);

  std::vector<GradCheckEntry> entries = check_primitives(cfg.seed);
  entries.push_back(check_end_to_end(cfg.encoder_config(), cfg.train_config(), cfg.seed));
  std::string csv = "component,max_rel_error,entries,status\n";
  std::size_t failures = 0;
  for (const GradCheckEntry& e : entries) {
    csv += csv_field(e.component) + "," + format_double(e.result.max_rel_error) + "," +
           std::to_string(e.result.entries_checked) + "," + (e.passed() ? "pass" : "FAIL") + "\n";
    if (!e.passed()) ++failures;
  }
  out << csv;
  if (manifest) {
    write_file(fs::path(o.out_dir) / "gradcheck.csv", csv);
    manifest->artifact("gradcheck.csv");
    manifest->finish();
  }
  if (failures > 0) {
    std::ostringstream msg;
    msg << failures << " component(s) exceed relative error " << kGradCheckTolerance;
    fail(ErrorKind::kNumeric, msg.str());
  }
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--data", o.data_dir, "directory with train/val/test .jsonl");
  cmd->add_option("--set", o.overrides, "config override KEY=VALUE (repeatable)");
}

void add_value_flag(CLI::App* cmd, CommonOptions& o, const std::string& flag, const std::string& key,
                    const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.flag_values[key] = v; }, help);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidence-aware self-distillation for missing-modality classification", "casd"};
  app.require_subcommand(1);
  CommonOptions o;

  auto* gen = app.add_subcommand("gen", "generate the synthetic train/val/test splits");
  auto* train = app.add_subcommand("train", "pretrain the teacher, then co-train the student");
  auto* eval = app.add_subcommand("eval", "score a checkpoint under missing-modality conditions");
  auto* ablate = app.add_subcommand("ablate", "four cumulative variants over several seeds");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  for (auto* cmd : {gen, train, eval, ablate, gradcheck}) add_common(cmd, o);

  for (auto* cmd : {train, ablate}) {
    add_value_flag(cmd, o, "--alpha", "alpha", "weight of logits distillation");
    add_value_flag(cmd, o, "--beta", "beta", "weight of uncertainty distillation");
    add_value_flag(cmd, o, "--temperature", "temperature", "softmax temperature of the distillation term");
    add_value_flag(cmd, o, "--freeze-teacher", "freeze_teacher", "keep the teacher fixed while co-training");
    add_value_flag(cmd, o, "--normalized-weights", "normalized_weights", "divide fusion weights by their sum");
  }

  std::string checkpoint, conditions;
  bool p_sweep = false;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file written by train");
  eval->add_option("--conditions", conditions, "e.g. \"{l};{a,v};{l,a,v}\" (default: all)");
  eval->add_flag("--p-sweep", p_sweep, "add full-modality rows for frame-drop rates 0.0..1.0");

  std::string fault_op;
  double fault_factor = 1.5;
  gradcheck->add_option("--inject-fault", fault_op, "test fixture: scale the backward rule of OP");
  gradcheck->add_option("--fault-factor", fault_factor, "multiplier used by --inject-fault");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "casd: " << e.what() << "\n";
    return exit_code(ErrorKind::kUsage);
  }

  try {
    if (*gen) return cmd_gen(o, out);
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, checkpoint, conditions, p_sweep, out);
    if (*ablate) return cmd_ablate(o, out);
    return cmd_gradcheck(o, fault_op, fault_factor, out);
  } catch (const Error& e) {
    err << "casd: error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "casd: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace casd

#include "casd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "casd/error.hpp"

namespace casd {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  fail(ErrorKind::kConfig,
       "config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " + expected);
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean (true/false)");
}

std::string compact(ModalityMask m) {
  std::string s;
  for (std::size_t i = 0; i < kNumModalities; ++i) {
    if (m.has(i)) s += kModalityLetters[i];
  }
  return s;
}

std::string format_patterns(const std::vector<ModalityMask>& masks) {
  std::string s;
  for (ModalityMask m : masks) {
    if (!s.empty()) s += ' ';
    s += compact(m);
  }
  return s;
}

std::vector<ModalityMask> parse_patterns(std::string_view key, std::string_view v) {
  std::vector<ModalityMask> out;
  std::istringstream in{std::string(v)};
  std::string token;
  while (in >> token) {
    try {
      out.push_back(parse_mask(token));
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, "config key '" + std::string(key) + "': " + e.what());
    }
  }
  if (out.empty()) bad_value(key, v, "a space-separated list of modality sets");
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
};

#define CASD_UINT_KEY(name, field)                                                          \
  Key {                                                                                     \
    name, [](const RunConfig& c) { return std::to_string(c.field); },                       \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.field = parse_uint(k, v); } \
  }
#define CASD_DOUBLE_KEY(name, field)                                                          \
  Key {                                                                                       \
    name, [](const RunConfig& c) { return format_double(c.field); },                          \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.field = parse_double(k, v); } \
  }
#define CASD_BOOL_KEY(name, field)                                                                  \
  Key {                                                                                             \
    name, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); },               \
        [](RunConfig& c, std::string_view k, std::string_view v) { c.field = parse_bool(k, v); } \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys{
      CASD_UINT_KEY("seed", seed),
      CASD_UINT_KEY("n_classes", data.n_classes),
      CASD_UINT_KEY("n_train", data.n_train),
      CASD_UINT_KEY("n_val", data.n_val),
      CASD_UINT_KEY("n_test", data.n_test),
      CASD_UINT_KEY("seq_len", data.seq_len),
      CASD_UINT_KEY("d_in_l", data.d_in[0]),
      CASD_UINT_KEY("d_in_a", data.d_in[1]),
      CASD_UINT_KEY("d_in_v", data.d_in[2]),
      CASD_DOUBLE_KEY("snr_l", data.snr[0]),
      CASD_DOUBLE_KEY("snr_a", data.snr[1]),
      CASD_DOUBLE_KEY("snr_v", data.snr[2]),
      CASD_DOUBLE_KEY("prototype_scale", data.prototype_scale),
      CASD_UINT_KEY("d_model", d_model),
      CASD_UINT_KEY("epochs_teacher", train.epochs_teacher),
      CASD_UINT_KEY("epochs_cotrain", train.epochs_cotrain),
      CASD_UINT_KEY("batch_size", train.batch_size),
      CASD_DOUBLE_KEY("learning_rate", train.optimizer.learning_rate),
      CASD_DOUBLE_KEY("momentum", train.optimizer.momentum),
      CASD_DOUBLE_KEY("grad_clip", train.optimizer.grad_clip),
      CASD_DOUBLE_KEY("alpha", train.loss.alpha),
      CASD_DOUBLE_KEY("beta", train.loss.beta),
      CASD_DOUBLE_KEY("temperature", train.loss.temperature),
      CASD_DOUBLE_KEY("p_intra", train.mrm.p_intra),
      Key{"inter_patterns", [](const RunConfig& c) { return format_patterns(c.train.mrm.inter_patterns); },
          [](RunConfig& c, std::string_view k, std::string_view v) { c.train.mrm.inter_patterns = parse_patterns(k, v); }},
      Key{"fusion",
          [](const RunConfig& c) {
            return std::string(c.train.fusion.mode == FusionMode::kMean ? "mean" : "confidence");
          },
          [](RunConfig& c, std::string_view k, std::string_view v) {
            if (v == "confidence") {
              c.train.fusion.mode = FusionMode::kConfidence;
            } else if (v == "mean") {
              c.train.fusion.mode = FusionMode::kMean;
            } else {
              bad_value(k, v, "'confidence' or 'mean'");
            }
          }},
      CASD_BOOL_KEY("normalized_weights", train.fusion.normalized_weights),
      CASD_BOOL_KEY("rrm", train.rrm),
      CASD_BOOL_KEY("freeze_teacher", train.freeze_teacher),
      CASD_UINT_KEY("eval_seed", eval_seed),
      CASD_UINT_KEY("ablation_seeds", ablation_seeds),
  };
  return keys;
}

#undef CASD_UINT_KEY
#undef CASD_DOUBLE_KEY
#undef CASD_BOOL_KEY

const Key& find_key(std::string_view name) {
  for (const Key& k : key_table()) {
    if (k.name == name) return k;
  }
  fail(ErrorKind::kConfig, "unknown config key '" + std::string(name) + "'");
}

}  // namespace

SyntheticSpec RunConfig::synthetic_spec() const {
  SyntheticSpec s = data;
  s.seed = seed;
  return s;
}

EncoderConfig RunConfig::encoder_config() const { return {data.d_in, d_model, data.seq_len, data.n_classes}; }

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

void validate(const RunConfig& cfg) {
  validate(cfg.synthetic_spec());
  validate(cfg.encoder_config());
  validate(cfg.train_config());
  if (cfg.ablation_seeds == 0) fail(ErrorKind::kConfig, "ablation_seeds must be positive");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const Key& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_key(key).set(cfg, key, trim(value));
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) { return find_key(key).get(cfg); }

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Key& k : key_table()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

RunConfig parse_config(std::string_view text, const std::string& origin) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::kConfig, where() + "expected 'key = value'");
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) {
      fail(ErrorKind::kConfig, where() + "duplicate config key '" + std::string(key) + "'");
    }
    try {
      set_config_value(cfg, key, value);
    } catch (const Error& e) {
      fail(e.kind(), where() + e.what());
    }
  }
  try {
    validate(cfg);
  } catch (const Error& e) {
    fail(e.kind(), origin + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace casd

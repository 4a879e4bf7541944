#include "casd/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "casd/error.hpp"

namespace casd {

namespace {

constexpr const char* kMagic = "casd-checkpoint 1";

[[noreturn]] void malformed(const std::string& origin, std::size_t line, const std::string& what) {
  fail(ErrorKind::kData, origin + ":" + std::to_string(line) + ": " + what);
}

class LineReader {
 public:
  LineReader(const std::string& text, std::string origin) : in_(text), origin_(std::move(origin)) {}

  std::string next(const char* expecting) {
    std::string line;
    if (!std::getline(in_, line)) malformed(origin_, line_ + 1, std::string("unexpected end, expected ") + expecting);
    ++line_;
    return line;
  }
  std::size_t line() const { return line_; }
  const std::string& origin() const { return origin_; }

 private:
  std::istringstream in_;
  std::string origin_;
  std::size_t line_ = 0;
};

std::size_t expect_count(LineReader& r, const std::string& keyword) {
  std::string line = r.next(keyword.c_str());
  std::istringstream ls(line);
  std::string word;
  std::size_t n = 0;
  if (!(ls >> word >> n) || word != keyword) malformed(r.origin(), r.line(), "expected '" + keyword + " <count>'");
  return n;
}

}  // namespace

std::string serialize_checkpoint(const CasdModel& model, const RunConfig& config, const std::string& role) {
  std::string out = std::string(kMagic) + "\nrole " + role + "\n";
  auto entries = config_entries(config);
  out += "config " + std::to_string(entries.size()) + "\n";
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  auto params = model.parameters();
  out += "tensors " + std::to_string(params.size()) + "\n";
  for (const Parameter* p : params) {
    out += p->name + " " + std::to_string(p->value.rank());
    for (std::size_t d : p->value.shape()) out += " " + std::to_string(d);
    out += "\n";
    bool first = true;
    for (double x : p->value.data()) {
      if (!first) out += ' ';
      out += format_double(x);
      first = false;
    }
    out += "\n";
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& origin) {
  LineReader r(text, origin);
  if (r.next("header") != kMagic) malformed(origin, r.line(), "not a checkpoint (bad header)");
  Checkpoint ckpt;
  {
    std::string line = r.next("role");
    if (line.rfind("role ", 0) != 0) malformed(origin, r.line(), "expected 'role <name>'");
    ckpt.role = line.substr(5);
  }
  std::size_t n_config = expect_count(r, "config");
  std::string config_text;
  for (std::size_t i = 0; i < n_config; ++i) config_text += r.next("config entry") + "\n";
  ckpt.config = parse_config(config_text, origin + " (embedded config)");

  std::size_t n_tensors = expect_count(r, "tensors");
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::istringstream head(r.next("tensor header"));
    std::string name;
    std::size_t rank = 0;
    if (!(head >> name >> rank) || rank == 0) malformed(origin, r.line(), "bad tensor header");
    Shape shape(rank);
    for (std::size_t& d : shape) {
      if (!(head >> d)) malformed(origin, r.line(), "bad shape for " + name);
    }
    Tensor t(shape);
    std::string values = r.next("tensor values");
    const char* p = values.data();
    const char* end = p + values.size();
    for (double& x : t.data()) {
      while (p < end && *p == ' ') ++p;
      auto res = std::from_chars(p, end, x);
      if (res.ec != std::errc()) malformed(origin, r.line(), "bad value in " + name);
      p = res.ptr;
    }
    while (p < end && *p == ' ') ++p;
    if (p != end) malformed(origin, r.line(), "too many values for " + name + " " + shape_str(shape));
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

void save_checkpoint(const CasdModel& model, const RunConfig& config, const std::string& role,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  out << serialize_checkpoint(model, config, role);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str(), path.string());
}

void restore(CasdModel& model, const Checkpoint& ckpt) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) {
    if (!by_name.emplace(name, &t).second) fail(ErrorKind::kData, "checkpoint: duplicate tensor " + name);
  }
  auto params = model.parameters();
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) fail(ErrorKind::kData, "checkpoint: missing tensor " + p->name);
    if (it->second->shape() != p->value.shape()) {
      fail(ErrorKind::kDimension, "checkpoint: " + p->name + " has shape " + shape_str(it->second->shape()) +
                                      ", model expects " + shape_str(p->value.shape()));
    }
  }
  if (by_name.size() != params.size()) {
    for (const auto& [name, t] : ckpt.tensors) {
      bool known = false;
      for (Parameter* p : params) known = known || p->name == name;
      if (!known) fail(ErrorKind::kData, "checkpoint: unexpected tensor " + name);
    }
  }
  for (Parameter* p : params) p->value = *by_name.at(p->name);
}

CasdModel load_model(const Checkpoint& ckpt) {
  validate(ckpt.config);
  Rng rng = make_rng(0);
  CasdModel model(ckpt.config.encoder_config(), rng);
  restore(model, ckpt);
  return model;
}

}  // namespace casd

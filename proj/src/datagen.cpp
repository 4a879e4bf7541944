#include "casd/datagen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "casd/error.hpp"
#include "casd/random.hpp"

namespace casd {

namespace {

constexpr std::array<const char*, kNumModalities> kJsonKeys{"L", "A", "V"};

std::string describe(const SyntheticSpec& s) {
  std::ostringstream os;
  os << "synthetic:C=" << s.n_classes << ",T=" << s.seq_len << ",d=" << s.d_in[0] << "/" << s.d_in[1] << "/"
     << s.d_in[2] << ",snr=" << s.snr[0] << "/" << s.snr[1] << "/" << s.snr[2] << ",scale=" << s.prototype_scale
     << ",seed=" << s.seed;
  return os.str();
}

Tensor make_sequence(const Tensor& prototype, std::size_t T, double snr, Rng& rng) {
  std::size_t d = prototype.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  // T+2 raw frames so every output frame averages three neighbours.
  Tensor raw({T + 2, d});
  for (double& x : raw.data()) x = normal(rng);
  Tensor seq({T, d});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      double noise = (raw.at(t, j) + raw.at(t + 1, j) + raw.at(t + 2, j)) / 3.0;
      seq.at(t, j) = snr > 0.0 ? prototype[j] + noise / snr : noise;
    }
  }
  return seq;
}

Dataset make_split(const SyntheticSpec& spec, const std::vector<ModalityInputs>& prototypes, std::size_t count,
                   std::uint64_t split_id, const char* name) {
  Dataset ds;
  ds.split = name;
  ds.provenance = describe(spec);
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(spec.seed, {1, split_id, i});
    Sample s;
    s.label = i % spec.n_classes;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      s.x[m] = make_sequence(prototypes[s.label][m], spec.seq_len, spec.snr[m], rng);
    }
    ds.samples.push_back(std::move(s));
  }
  Rng order = make_rng(spec.seed, {2, split_id});
  std::shuffle(ds.samples.begin(), ds.samples.end(), order);
  return ds;
}

[[noreturn]] void ingest_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  fail(ErrorKind::kData, path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.n_classes < 2) fail(ErrorKind::kConfig, "n_classes must be at least 2");
  if (spec.n_train == 0 || spec.n_val == 0 || spec.n_test == 0) {
    fail(ErrorKind::kConfig, "every split needs at least one sample");
  }
  if (spec.seq_len == 0) fail(ErrorKind::kConfig, "seq_len must be positive");
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    if (spec.d_in[m] == 0) fail(ErrorKind::kConfig, "modality input width must be positive");
    if (!(spec.snr[m] >= 0.0)) fail(ErrorKind::kConfig, "snr must be non-negative");
  }
  if (!(spec.prototype_scale >= 0.0)) fail(ErrorKind::kConfig, "prototype_scale must be non-negative");
}

DatasetSplits generate(const SyntheticSpec& spec) {
  validate(spec);
  std::vector<ModalityInputs> prototypes(spec.n_classes);
  Rng proto_rng = make_rng(spec.seed, {0});
  std::normal_distribution<double> normal(0.0, spec.prototype_scale);
  for (auto& per_class : prototypes) {
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      per_class[m] = Tensor({spec.d_in[m]});
      for (double& x : per_class[m].data()) x = spec.prototype_scale > 0.0 ? normal(proto_rng) : 0.0;
    }
  }
  return {make_split(spec, prototypes, spec.n_train, 0, "train"), make_split(spec, prototypes, spec.n_val, 1, "val"),
          make_split(spec, prototypes, spec.n_test, 2, "test")};
}

Dataset load_jsonl(const std::filesystem::path& path, const DataShape& shape) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "cannot open dataset " + path.string());
  Dataset ds;
  ds.provenance = path.string();
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      ingest_error(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) ingest_error(path, line_no, "record is not an object");
    Sample s;
    if (!rec.contains("label")) ingest_error(path, line_no, "missing field 'label'");
    const auto& label = rec["label"];
    if (!label.is_number_integer() || label.get<long long>() < 0 ||
        label.get<long long>() >= static_cast<long long>(shape.n_classes)) {
      ingest_error(path, line_no, "unknown label " + label.dump());
    }
    s.label = label.get<std::size_t>();
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const char* key = kJsonKeys[m];
      if (!rec.contains(key)) ingest_error(path, line_no, std::string("missing field '") + key + "'");
      const auto& frames = rec[key];
      if (!frames.is_array()) ingest_error(path, line_no, std::string("field '") + key + "' is not an array");
      Tensor seq({shape.seq_len, shape.d_in[m]});
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& frame = frames[t];
        if (!frame.is_array() || frame.size() != shape.d_in[m]) {
          ingest_error(path, line_no, std::string("ragged dimensions in '") + key + "' frame " + std::to_string(t) +
                                          ", expected " + std::to_string(shape.d_in[m]) + " values");
        }
        for (std::size_t j = 0; j < frame.size(); ++j) {
          if (!frame[j].is_number()) ingest_error(path, line_no, std::string("non-numeric value in '") + key + "'");
          if (t < shape.seq_len) seq.at(t, j) = frame[j].get<double>();
        }
      }
      s.x[m] = std::move(seq);
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) fail(ErrorKind::kData, path.string() + ": dataset is empty");
  return ds;
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const Sample& s : dataset.samples) {
    nlohmann::json rec;
    rec["label"] = s.label;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      nlohmann::json frames = nlohmann::json::array();
      const Tensor& x = s.x[m];
      for (std::size_t t = 0; t < x.dim(0); ++t) {
        auto row = x.row(t);
        frames.push_back(std::vector<double>(row.begin(), row.end()));
      }
      rec[kJsonKeys[m]] = std::move(frames);
    }
    out << rec.dump() << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

DatasetSplits split(const Dataset& dataset, const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) fail(ErrorKind::kConfig, "split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) fail(ErrorKind::kConfig, "split ratios must sum to 1");
  std::size_t n = dataset.samples.size();
  auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    fail(ErrorKind::kConfig, "split of " + std::to_string(n) + " samples leaves an empty partition");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {3});
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplits out;
  out.train.split = "train";
  out.val.split = "val";
  out.test.split = "test";
  for (Dataset* d : {&out.train, &out.val, &out.test}) d->provenance = dataset.provenance;
  for (std::size_t i = 0; i < n; ++i) {
    Dataset& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    dst.samples.push_back(dataset.samples[order[i]]);
  }
  return out;
}

}  // namespace casd

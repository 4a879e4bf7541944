#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "casd/datagen.hpp"
#include "casd/error.hpp"
#include "casd/metrics.hpp"

using namespace casd;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("casd_datagen_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

bool same_samples(const Dataset& a, const Dataset& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    if (a.samples[i].label != b.samples[i].label) return false;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      if (!(a.samples[i].x[m] == b.samples[i].x[m])) return false;
    }
  }
  return true;
}

std::vector<double> pooled(const Tensor& x) {
  std::vector<double> out(x.dim(1), 0.0);
  for (std::size_t t = 0; t < x.dim(0); ++t) {
    for (std::size_t j = 0; j < x.dim(1); ++j) out[j] += x.at(t, j) / static_cast<double>(x.dim(0));
  }
  return out;
}

// Nearest-centroid classifier on one time-pooled modality, fit on train.
double unimodal_f1(const DatasetSplits& d, std::size_t modality, std::size_t n_classes) {
  std::vector<std::vector<double>> centroid(n_classes);
  std::vector<double> count(n_classes, 0.0);
  for (const Sample& s : d.train.samples) {
    auto p = pooled(s.x[modality]);
    if (centroid[s.label].empty()) centroid[s.label].assign(p.size(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) centroid[s.label][j] += p[j];
    count[s.label] += 1.0;
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (double& x : centroid[c]) x /= count[c];
  }
  std::vector<std::size_t> labels, preds;
  for (const Sample& s : d.test.samples) {
    auto p = pooled(s.x[modality]);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < n_classes; ++c) {
      double dist = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) dist += (p[j] - centroid[c][j]) * (p[j] - centroid[c][j]);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    labels.push_back(s.label);
    preds.push_back(best);
  }
  return compute_metrics(labels, preds, n_classes).macro_f1;
}

}  // namespace

TEST_CASE("generation is deterministic and shaped by its settings") {
  SyntheticSpec spec;
  spec.seed = 11;
  DatasetSplits a = generate(spec), b = generate(spec);
  CHECK(same_samples(a.train, b.train));
  CHECK(same_samples(a.test, b.test));
  CHECK(a.train.samples.size() == 600);
  CHECK(a.val.samples.size() == 100);
  CHECK(a.test.samples.size() == 300);
  CHECK(a.train.split == "train");
  CHECK(a.train.provenance.find("seed=11") != std::string::npos);
  const Sample& s = a.train.samples[0];
  CHECK(s.x[0].shape() == Shape{16, 12});
  CHECK(s.x[1].shape() == Shape{16, 8});
  CHECK(s.x[2].shape() == Shape{16, 8});
  spec.seed = 12;
  CHECK_FALSE(same_samples(generate(spec).train, a.train));
}

TEST_CASE("labels are balanced within every split") {
  for (std::size_t classes : {2u, 3u, 5u}) {
    SyntheticSpec spec;
    spec.n_classes = classes;
    spec.n_train = 101;
    spec.n_val = 7;
    spec.n_test = 50;
    DatasetSplits d = generate(spec);
    for (const Dataset* ds : {&d.train, &d.val, &d.test}) {
      std::vector<std::size_t> counts(classes, 0);
      for (const Sample& s : ds->samples) ++counts[s.label];
      auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
      CHECK(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("splits are disjoint draws") {
  SyntheticSpec spec;
  spec.n_train = 20;
  spec.n_val = 20;
  spec.n_test = 20;
  DatasetSplits d = generate(spec);
  for (const Sample& a : d.train.samples) {
    for (const Sample& b : d.test.samples) CHECK_FALSE(a.x[0] == b.x[0]);
  }
}

TEST_CASE("a zero-snr modality is uninformative and informativeness follows snr") {
  double zero = 0.0, low = 0.0, high = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.d_in = {8, 8, 8};
    spec.snr = {0.0, 1.0, 3.0};
    DatasetSplits d = generate(spec);
    zero += unimodal_f1(d, 0, 2) / 5.0;
    low += unimodal_f1(d, 1, 2) / 5.0;
    high += unimodal_f1(d, 2, 2) / 5.0;
  }
  CHECK(std::abs(zero - 0.5) <= 0.05);
  CHECK(high > low);
  CHECK(low > zero);
}

TEST_CASE("JSONL round trip") {
  fs::path dir = temp_dir("roundtrip");
  SyntheticSpec spec;
  spec.n_train = 12;
  spec.n_val = 4;
  spec.n_test = 4;
  DatasetSplits d = generate(spec);
  save_jsonl(d.train, dir / "train.jsonl");
  Dataset back = load_jsonl(dir / "train.jsonl", spec.shape());
  REQUIRE(back.samples.size() == d.train.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    CHECK(back.samples[i].label == d.train.samples[i].label);
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      worst = std::max(worst, max_abs_diff(back.samples[i].x[m], d.train.samples[i].x[m]));
    }
  }
  CHECK(worst <= 1e-9);
  CHECK(back.provenance == (dir / "train.jsonl").string());
  fs::remove_all(dir);
}

TEST_CASE("ingestion aligns sequence length and reports bad records") {
  fs::path dir = temp_dir("ingest");
  DataShape shape{3, {2, 1, 1}, 2};

  write_file(dir / "short.jsonl", R"({"label": 1, "L": [[1, 2]], "A": [[3], [4]], "V": [[5], [6], [7], [8]]})"
                                  "\n");
  Dataset d = load_jsonl(dir / "short.jsonl", shape);
  REQUIRE(d.samples.size() == 1);
  CHECK(d.samples[0].x[0] == Tensor::matrix({{1, 2}, {0, 0}, {0, 0}}));
  CHECK(d.samples[0].x[1] == Tensor::matrix({{3}, {4}, {0}}));
  CHECK(d.samples[0].x[2] == Tensor::matrix({{5}, {6}, {7}}));

  auto expect_error = [&](const std::string& name, const std::string& text, const std::string& needle) {
    write_file(dir / name, text);
    try {
      load_jsonl(dir / name, shape);
      FAIL("expected an ingestion error for " << name);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kData);
      std::string msg = e.what();
      CHECK_MESSAGE(msg.find(needle) != std::string::npos, msg);
    }
  };
  expect_error("empty.jsonl", "", "empty");
  const std::string ok = R"({"label": 0, "L": [[1, 2]], "A": [[3]], "V": [[5]]})";
  expect_error("ragged.jsonl", ok + "\n" + R"({"label": 0, "L": [[1, 2], [3]], "A": [[3]], "V": [[5]]})" + "\n",
               ":2: ragged");
  expect_error("missing.jsonl", R"({"label": 0, "L": [[1, 2]], "A": [[3]]})", ":1: missing field 'V'");
  expect_error("label.jsonl", R"({"label": 2, "L": [[1, 2]], "A": [[3]], "V": [[5]]})", "unknown label 2");
  expect_error("nolabel.jsonl", R"({"L": [[1, 2]], "A": [[3]], "V": [[5]]})", "missing field 'label'");
  expect_error("broken.jsonl", "{not json", ":1: malformed JSON");
  CHECK_THROWS_AS(load_jsonl(dir / "absent.jsonl", shape), Error);
  fs::remove_all(dir);
}

TEST_CASE("split") {
  Dataset all;
  for (std::size_t i = 0; i < 100; ++i) {
    Sample s;
    s.label = i % 2;
    s.x[0] = Tensor::scalar(static_cast<double>(i));
    all.samples.push_back(s);
  }
  DatasetSplits parts = split(all, {0.6, 0.2, 0.2}, 4);
  CHECK(parts.train.samples.size() == 60);
  CHECK(parts.val.samples.size() == 20);
  CHECK(parts.test.samples.size() == 20);

  std::multiset<double> seen;
  for (const Dataset* d : {&parts.train, &parts.val, &parts.test}) {
    for (const Sample& s : d->samples) seen.insert(s.x[0].item());
  }
  std::multiset<double> original;
  for (const Sample& s : all.samples) original.insert(s.x[0].item());
  CHECK(seen == original);

  DatasetSplits again = split(all, {0.6, 0.2, 0.2}, 4);
  CHECK(same_samples(again.train, parts.train));
  CHECK_FALSE(same_samples(split(all, {0.6, 0.2, 0.2}, 5).train, parts.train));

  CHECK_THROWS_AS(split(all, {1.0, 0.0, 0.0}, 4), Error);
  CHECK_THROWS_AS(split(all, {0.5, 0.2, 0.2}, 4), Error);
  Dataset tiny;
  tiny.samples.resize(2);
  CHECK_THROWS_AS(split(tiny, {0.6, 0.2, 0.2}, 4), Error);
}

TEST_CASE("generator settings are validated") {
  SyntheticSpec spec;
  spec.snr[1] = -1.0;
  CHECK_THROWS_AS(generate(spec), Error);
  spec = SyntheticSpec{};
  spec.n_classes = 1;
  CHECK_THROWS_AS(generate(spec), Error);
  spec = SyntheticSpec{};
  spec.seq_len = 0;
  CHECK_THROWS_AS(generate(spec), Error);
}

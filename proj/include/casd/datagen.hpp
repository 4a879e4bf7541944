#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "casd/modality.hpp"

namespace casd {

struct Sample {
  ModalityInputs x;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::string split;       // "train", "val", "test" or empty
  std::string provenance;  // generator settings digest or source path
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Shape contract every ingested sample is aligned to.
struct DataShape {
  std::size_t seq_len = 16;
  std::array<std::size_t, kNumModalities> d_in{12, 8, 8};
  std::size_t n_classes = 2;
};

struct SyntheticSpec {
  std::size_t n_classes = 2;
  std::size_t n_train = 600;
  std::size_t n_val = 100;
  std::size_t n_test = 300;
  std::size_t seq_len = 16;
  std::array<std::size_t, kNumModalities> d_in{12, 8, 8};
  // Per-modality signal-to-noise; 0 makes a modality pure noise.
  std::array<double, kNumModalities> snr{3.0, 1.5, 1.0};
  double prototype_scale = 0.05;
  std::uint64_t seed = 0;

  DataShape shape() const { return {seq_len, d_in, n_classes}; }
};

void validate(const SyntheticSpec& spec);

// Class prototypes per modality, broadcast over time, plus 3-tap smoothed
// Gaussian noise scaled by 1/snr. Labels are balanced within each split.
DatasetSplits generate(const SyntheticSpec& spec);

// One JSON object per line: {"label": int, "L": [[...]], "A": [[...]], "V": [[...]]}.
// Sequences are truncated or zero-padded to shape.seq_len.
Dataset load_jsonl(const std::filesystem::path& path, const DataShape& shape);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// Seeded shuffle, then partition by ratios (which must sum to 1).
DatasetSplits split(const Dataset& dataset, const std::array<double, 3>& ratios, std::uint64_t seed);

}  // namespace casd

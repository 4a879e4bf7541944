#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "casd/datagen.hpp"
#include "casd/encoder.hpp"
#include "casd/train.hpp"

namespace casd {

// Everything a command needs, flattened from the sub-configs. The data shape
// (seq_len, d_in, n_classes) is shared by the generator and the model.
struct RunConfig {
  std::uint64_t seed = 0;
  SyntheticSpec data;
  std::size_t d_model = 16;
  TrainConfig train;
  std::uint64_t eval_seed = 1;  // seeds intra-modality corruption at evaluation
  std::size_t ablation_seeds = 5;

  SyntheticSpec synthetic_spec() const;
  EncoderConfig encoder_config() const;
  TrainConfig train_config() const;
  DataShape data_shape() const { return data.shape(); }
};

void validate(const RunConfig& cfg);

// Ordered key names; the file format and the manifest use exactly these.
const std::vector<std::string>& config_keys();

// Throws a config error naming the key if it is unknown or the value does
// not parse.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

// All keys with their values, defaults included.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

// `key = value` lines; blank lines and lines starting with '#' are skipped.
// Repeated keys are rejected. `origin` prefixes error messages.
RunConfig parse_config(std::string_view text, const std::string& origin = "config");
RunConfig load_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& cfg);

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

}  // namespace casd

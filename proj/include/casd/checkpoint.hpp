#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "casd/config.hpp"
#include "casd/encoder.hpp"

namespace casd {

// Text checkpoint: a header, the resolved config the model was built from,
// then one `name rank dims...` line and one value line per parameter.
// Values are written in shortest round-trip form, so reloading is exact.
struct Checkpoint {
  std::string role;  // "teacher" or "student"
  RunConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

std::string serialize_checkpoint(const CasdModel& model, const RunConfig& config, const std::string& role);
Checkpoint parse_checkpoint(const std::string& text, const std::string& origin = "checkpoint");

void save_checkpoint(const CasdModel& model, const RunConfig& config, const std::string& role,
                     const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint tensors into `model`. Every parameter must be present with
// a matching shape (dimension error otherwise); extra tensors are rejected.
void restore(CasdModel& model, const Checkpoint& ckpt);

// Builds a model from the embedded config and restores its parameters.
CasdModel load_model(const Checkpoint& ckpt);

}  // namespace casd

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace casd {

// Entry point of the `casd` tool: gen, train, eval, ablate, gradcheck.
// Returns the process exit status (0 ok, 1 I/O, 2 usage/config, 3 data,
// 4 numeric failure or gradcheck breach).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace casd

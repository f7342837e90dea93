#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sdmtl/training.hpp"

namespace sdmtl {

/// key=value lines, '#' comments, blank lines ignored. Unknown keys are
/// rejected by apply_config_file with the offending key named.
std::map<std::string, std::string> parse_key_value_file(const std::filesystem::path& path);

/// Applies a parsed config file onto a TrainConfig. Command-line flags are
/// applied afterwards by the caller, so flags override the file.
void apply_config_file(TrainConfig& config, const std::map<std::string, std::string>& kv);

/// Entry point behind the binary. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

}  // namespace sdmtl

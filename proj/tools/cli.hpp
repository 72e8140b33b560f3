#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace polyforge::cli {

/// Settings shared by every subcommand. Filled from flags and, when
/// --config is given, from a key=value file whose keys are the long flag
/// names (flags on the command line win).
struct RunConfig {
  std::uint64_t seed = 42;
  std::string cache_mode = "replay";
  std::filesystem::path cache_root = ".polyforge-cache";
  std::size_t parallelism = 4;
  std::filesystem::path languages;
  std::filesystem::path templates;
  std::string translator_model = "gpt-4";
  std::string generator_model = "gpt-3.5-turbo";
  std::string judge_model = "gpt-4";
  double failure_threshold = 0.05;
  std::string endpoint_env = "POLYFORGE_ENDPOINT";
  std::string key_env = "POLYFORGE_API_KEY";

  /// Throws Error(kConfig) when a referenced path is missing or P < 1.
  void validate() const;
};

enum ExitCode : int { kOk = 0, kValidation = 1, kBreach = 2 };

/// Runs one command line (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polyforge::cli

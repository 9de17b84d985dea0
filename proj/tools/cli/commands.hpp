#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace denoiserank::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Maps the exception currently being handled to an exit code and prints it.
int report_exception(std::ostream& err);

// Settings shared by every command that reads a RunConfig. Precedence, lowest
// first: defaults, preset, config file, --set overrides, dedicated flags.
struct ConfigOptions {
  std::string config_file;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> reverse_steps;
  std::optional<std::size_t> repeat;
  std::optional<std::size_t> workers;
  std::string out_dir;
};

RunConfig resolve_config(const ConfigOptions& options);

struct PrepareOptions {
  std::string train;
  std::string valid;
  std::string test;
  std::string out_dir;
  std::size_t num_features = 0;  // 0: largest feature id seen
};

struct EvaluateOptions {
  ConfigOptions config;
  std::string checkpoint;
  std::string test_cache;
  std::string cutoffs;
};

struct InferOptions {
  ConfigOptions config;
  std::string checkpoint;
  std::string input;
  std::string output;
};

struct GradcheckOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
};

int cmd_prepare(const PrepareOptions& options, std::ostream& out);
int cmd_train(const ConfigOptions& options, std::ostream& out, std::ostream& log);
int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& log);
int cmd_infer(const InferOptions& options, std::ostream& out);
int cmd_diversity(const EvaluateOptions& options, std::ostream& out, std::ostream& log);
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out);

}  // namespace denoiserank::cli

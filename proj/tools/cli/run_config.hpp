#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "denoiserank/evaluate.hpp"
#include "denoiserank/sampler.hpp"
#include "denoiserank/trainer.hpp"

namespace denoiserank::cli {

enum class ValueKind { kInt, kCount, kReal, kBool, kText, kLoss, kSchedule, kCutoffs };

struct KeySpec {
  std::string key;
  ValueKind kind;
  std::string default_value;
  std::string help;
};

const std::vector<KeySpec>& config_schema();
std::vector<std::string> preset_names();

// Flat key = value configuration. Every key must appear in config_schema()
// and every value must parse as that key's kind; violations raise ConfigError.
class RunConfig {
 public:
  RunConfig();

  void apply_preset(std::string_view name);
  // `key = value` lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void set(std::string_view key, std::string_view value);
  // "key=value"
  void assign(std::string_view assignment);

  const std::string& get(std::string_view key) const;
  long long get_int(std::string_view key) const;
  double get_real(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  // Every key with its resolved value, sorted; loadable with load_file.
  std::string snapshot() const;

  TrainConfig train_config() const;  // model.k is filled in from the data
  SamplerConfig sampler_config() const;
  std::vector<Cutoff> cutoffs() const;
  std::vector<Cutoff> diversity_cutoffs() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace denoiserank::cli

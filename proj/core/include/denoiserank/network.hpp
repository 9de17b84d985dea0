#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "denoiserank/random.hpp"
#include "denoiserank/schedule.hpp"
#include "denoiserank/tensor.hpp"

namespace denoiserank {

struct ModelConfig {
  std::size_t k = 0;                // input feature dimension
  std::size_t d_model = 64;         // encoder width and denoise hidden size
  std::size_t heads = 4;
  std::size_t blocks = 3;
  std::size_t denoise_layers = 2;   // includes the input and output layers
  std::size_t ffn_multiplier = 4;   // encoder feed-forward width = d_model * ffn_multiplier
  double dropout = 0.1;
  bool use_attention = true;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

std::string describe(const ModelConfig& config);

// Named, ordered registry of every learnable tensor.
class ModelParams {
 public:
  ModelParams() = default;

  // Xavier-uniform weights, zero biases, unit layer-norm gains.
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  void add(std::string name, ad::Tensor tensor);
  const ad::Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::pair<std::string, ad::Tensor>>& entries() const { return entries_; }
  std::vector<ad::Tensor> tensors() const;
  std::size_t size() const { return entries_.size(); }
  // Total number of scalars.
  std::size_t scalar_count() const;
  void zero_grad();
  // Deep copy with fresh leaves.
  ModelParams clone() const;

 private:
  std::vector<std::pair<std::string, ad::Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ForwardMode {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

// Sinusoidal features of timestep t (sin block then cos block).
std::vector<double> sinusoidal_embedding(int t, std::size_t dim);

// The denoiser p_theta(D, y_t, t) together with the schedule it was trained for.
class DenoiseModel {
 public:
  DenoiseModel(ModelConfig config, ScheduleSpec schedule, std::uint64_t seed);
  DenoiseModel(ModelConfig config, ScheduleSpec schedule, ModelParams params);

  const ModelConfig& config() const { return config_; }
  const ScheduleSpec& schedule() const { return schedule_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  // Context-wise document features H (n x d_model) from an n x k feature
  // matrix. mask[i] == 0 marks a padded row that no real row attends to;
  // an empty mask means every row is real.
  ad::Tensor encode(const ad::Tensor& features, std::span<const std::uint8_t> mask,
                    ForwardMode mode) const;

  // Learned projection of the sinusoidal timestep features (d_model).
  ad::Tensor timestep_embedding(int t) const;

  // Predicted labels y0_hat in [0, 4] for each row of H.
  ad::Tensor denoise(const ad::Tensor& H, std::span<const double> y_t, int t,
                     ForwardMode mode) const;

  // Output-layer label weights (n x 5) before the weighted sum; exposed for tests.
  ad::Tensor grade_weights(const ad::Tensor& H, std::span<const double> y_t, int t,
                           ForwardMode mode) const;

 private:
  ad::Tensor linear(const ad::Tensor& x, const std::string& prefix) const;
  ad::Tensor attention(const ad::Tensor& x, const ad::Tensor& mask_bias, std::size_t block) const;

  ModelConfig config_;
  ScheduleSpec schedule_;
  ModelParams params_;
};

// Versioned binary checkpoint: config, schedule and every named parameter.
void save_checkpoint(const DenoiseModel& model, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const DenoiseModel& model);
DenoiseModel load_checkpoint(const std::filesystem::path& path);
DenoiseModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);
// Loads parameters and rejects checkpoints written for another config/schedule.
ModelParams load_params(const std::filesystem::path& path, const ModelConfig& expected_config,
                        const ScheduleSpec& expected_schedule);

}  // namespace denoiserank

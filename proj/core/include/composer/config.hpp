#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "composer/album.hpp"
#include "composer/model.hpp"
#include "composer/train.hpp"

namespace composer {

/// One CLI run, fully determined by this struct plus the seed. Round trips
/// through JSON losslessly.
struct RunConfig {
  RunMode mode = RunMode::kGeneration;
  int canvas_h = 64;
  int canvas_w = 48;
  int T = 100;
  int steps = -1;  // reverse steps; -1 means run the full chain
  std::uint64_t seed = 0;
  BindingMode binding = BindingMode::kBind123;
  ConsistencyMode consistency = ConsistencyMode::kIndependent;

  std::string data_dir;
  std::string out_dir;
  std::string checkpoint_dir;

  // Model shape.
  std::vector<int> dims = {8, 16, 32};
  int text_dim = 16;
  int time_dim = 16;

  // Training knobs.
  int train_steps = 500;
  float lr = 1e-2f;
  float weight_decay = 1e-4f;

  // Dataset knobs.
  int dataset_count = 64;
  std::vector<Category> categories = {Category::kUpper, Category::kLower};

  // Album knobs.
  int frames = 3;

  bool operator==(const RunConfig& other) const = default;
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

/// Model derived from the run: album runs use the generation-shaped model.
ModelConfig model_config_of(const RunConfig& config);
DatasetConfig dataset_config_of(const RunConfig& config);
TrainConfig train_config_of(const RunConfig& config);

}  // namespace composer

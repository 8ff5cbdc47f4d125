#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "composer/config.hpp"
#include "composer/train.hpp"

namespace composer {

struct AblationConfig {
  std::vector<BindingMode> variants = {BindingMode::kNone, BindingMode::kConvInMask,
                                       BindingMode::kBind1, BindingMode::kBind123};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  RunConfig base;        // model shape, dataset, training knobs
  int eval_samples = 4;  // fresh samples beyond the training set
};

struct AblationCell {
  BindingMode variant = BindingMode::kNone;
  std::uint64_t seed = 0;
  float region_error = 0.0f;
  float pattern_corr = 0.0f;
};

/// Trains and evaluates every (variant, seed) cell on the same dataset.
/// Cells are independent and deterministic, so they may run on up to
/// `threads` workers without changing any result.
std::vector<AblationCell> run_ablation(const AblationConfig& config,
                                       const std::vector<DatasetSample>& dataset, int threads);

/// Evaluate one trained model: generate eval samples and average region
/// fidelity over assets and samples.
AblationCell evaluate_cell(const CompositionModel& model, const TextEmbedder& embedder,
                           const AblationConfig& config, std::uint64_t seed);

void save_ablation_csv(const std::vector<AblationCell>& cells,
                       const std::filesystem::path& path);

/// COMPOSER_THREADS env var, defaulting to 1.
int configured_thread_count();

}  // namespace composer

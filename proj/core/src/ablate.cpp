#include "composer/ablate.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "composer/errors.hpp"

namespace composer {

AblationCell evaluate_cell(const CompositionModel& model, const TextEmbedder& embedder,
                           const AblationConfig& config, std::uint64_t seed) {
  AblationCell cell;
  cell.variant = model.config().binding;
  cell.seed = seed;

  const NoiseSchedule schedule = default_schedule(config.base.T);
  const DatasetConfig dcfg = dataset_config_of(config.base);
  float err = 0.0f, corr = 0.0f;
  int count = 0;
  for (int i = 0; i < config.eval_samples; ++i) {
    // Held-out samples: indices beyond the training range of the same
    // generator.
    const DatasetSample eval_sample = make_sample(dcfg, dcfg.count + i);
    const PreparedSample ps = prepare_sample(model, embedder, eval_sample);
    SampleResult generated = sample(model, schedule, ps.ref, ps.aux, ps.text,
                                    mix_seed(seed, 0xe5a1u + static_cast<std::uint64_t>(i)),
                                    schedule.T);
    FidelityReport report = region_fidelity(generated.image, eval_sample);
    err += report.mean_region_error;
    corr += report.mean_pattern_corr;
    ++count;
  }
  if (count > 0) {
    cell.region_error = err / static_cast<float>(count);
    cell.pattern_corr = corr / static_cast<float>(count);
  }
  return cell;
}

std::vector<AblationCell> run_ablation(const AblationConfig& config,
                                       const std::vector<DatasetSample>& dataset, int threads) {
  if (config.variants.empty() || config.seeds.empty()) {
    throw ParameterError("run_ablation: empty grid");
  }
  struct Job {
    BindingMode variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (BindingMode variant : config.variants) {
    for (std::uint64_t seed : config.seeds) jobs.push_back({variant, seed});
  }
  std::vector<AblationCell> cells(jobs.size());

  auto run_job = [&](size_t j) {
    RunConfig run = config.base;
    run.binding = jobs[j].variant;
    run.seed = jobs[j].seed;
    CompositionModel model(model_config_of(run));
    const TextEmbedder embedder(run.text_dim, config.base.seed);
    TrainConfig tcfg = train_config_of(run);
    train(model, dataset, embedder, tcfg);
    cells[j] = evaluate_cell(model, embedder, config, jobs[j].seed);
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) run_job(j);
      });
    }
    for (auto& t : pool) t.join();
  }
  return cells;
}

void save_ablation_csv(const std::vector<AblationCell>& cells,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write ablation csv " + path.string());
  out << "variant,seed,region_error,pattern_corr\n";
  char buf[40];
  auto fmt = [&buf](float v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    return std::string(buf, static_cast<size_t>(end - buf));
  };
  for (const auto& cell : cells) {
    out << binding_mode_name(cell.variant) << "," << cell.seed << "," << fmt(cell.region_error)
        << "," << fmt(cell.pattern_corr) << "\n";
  }
}

int configured_thread_count() {
  const char* env = std::getenv("COMPOSER_THREADS");
  if (env == nullptr) return 1;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(env, env + std::string_view(env).size(), value);
  if (ec != std::errc() || value < 1) return 1;
  return value;
}

}  // namespace composer

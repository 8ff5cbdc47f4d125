// Command-line surface for the compositional diffusion sandbox.
//
// Every subcommand is byte-reproducible from (argv, config, seed).
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "composer/ablate.hpp"
#include "composer/album.hpp"
#include "composer/config.hpp"
#include "composer/errors.hpp"
#include "composer/tensor_io.hpp"
#include "composer/train.hpp"

namespace fs = std::filesystem;
using namespace composer;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::string data_dir;
  std::string checkpoint_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string mode;
  std::string binding;
  std::string consistency;
  int steps = -1;
  bool steps_set = false;
  int n = -1;
  std::string seeds_csv;
  bool train_inline = false;
  std::string gradcheck_size = "small";
  std::string images_dir;
  int sample_index = 0;
};

RunConfig resolve_config(const CliOptions& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) cfg = load_run_config(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (!opt.mode.empty()) cfg.mode = run_mode_from_name(opt.mode);
  if (!opt.binding.empty()) cfg.binding = binding_mode_from_name(opt.binding);
  if (!opt.consistency.empty()) cfg.consistency = consistency_mode_from_name(opt.consistency);
  if (opt.steps_set) cfg.steps = opt.steps;
  if (!opt.data_dir.empty()) cfg.data_dir = opt.data_dir;
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (!opt.checkpoint_dir.empty()) cfg.checkpoint_dir = opt.checkpoint_dir;
  return cfg;
}

std::vector<DatasetSample> resolve_dataset(const RunConfig& cfg) {
  if (!cfg.data_dir.empty()) return load_dataset(cfg.data_dir);
  // No persisted dataset: build the configured one in memory.
  const DatasetConfig dcfg = dataset_config_of(cfg);
  std::vector<DatasetSample> samples;
  samples.reserve(static_cast<size_t>(dcfg.count));
  for (int i = 0; i < dcfg.count; ++i) samples.push_back(make_sample(dcfg, i));
  return samples;
}

CompositionModel resolve_model(const RunConfig& cfg) {
  if (!cfg.checkpoint_dir.empty()) return CompositionModel::load_checkpoint(cfg.checkpoint_dir);
  return CompositionModel(model_config_of(cfg));
}

int run_gen_dataset(const CliOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  if (opt.n >= 0) cfg.dataset_count = opt.n;
  DatasetConfig dcfg = dataset_config_of(cfg);
  generate_dataset(dcfg, cfg.out_dir);
  std::printf("wrote %d samples to %s\n", dcfg.count, cfg.out_dir.c_str());
  return 0;
}

int run_train(const CliOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  if (opt.steps_set) cfg.train_steps = opt.steps;
  const std::vector<DatasetSample> data = resolve_dataset(cfg);
  CompositionModel model(model_config_of(cfg));
  const TextEmbedder embedder(cfg.text_dim, cfg.seed);
  TrainConfig tcfg = train_config_of(cfg);
  const TrainResult result = train(model, data, embedder, tcfg);
  fs::create_directories(cfg.out_dir);
  model.save_checkpoint(fs::path(cfg.out_dir) / "checkpoint");
  save_loss_curve(result, fs::path(cfg.out_dir) / "loss.csv");
  save_run_config(cfg, fs::path(cfg.out_dir) / "run_config.json");
  std::printf("trained %d steps; checkpoint in %s\n", tcfg.steps,
              (fs::path(cfg.out_dir) / "checkpoint").string().c_str());
  return 0;
}

int run_sample(const CliOptions& opt, RunMode forced_mode) {
  RunConfig cfg = resolve_config(opt);
  cfg.mode = forced_mode;
  const std::vector<DatasetSample> data = resolve_dataset(cfg);
  if (opt.sample_index < 0 || opt.sample_index >= static_cast<int>(data.size())) {
    throw ParameterError("sample index " + std::to_string(opt.sample_index) +
                         " outside dataset of " + std::to_string(data.size()));
  }
  const DatasetSample& ds = data[static_cast<size_t>(opt.sample_index)];
  CompositionModel model = resolve_model(cfg);
  if (model.config().mode != forced_mode) {
    throw ModeError(std::string("checkpoint is a ") + run_mode_name(model.config().mode) +
                    " model; this subcommand needs " + run_mode_name(forced_mode));
  }
  const TextEmbedder embedder(model.config().text_dim, cfg.seed);
  const PreparedSample ps = prepare_sample(model, embedder, ds);
  const NoiseSchedule schedule = default_schedule(cfg.T);
  const int steps = cfg.steps < 0 ? schedule.T : cfg.steps;
  const SampleResult result =
      sample(model, schedule, ps.ref, ps.aux, ps.text, cfg.seed, steps);

  fs::create_directories(cfg.out_dir);
  char stem[32];
  std::snprintf(stem, sizeof(stem), "gen_%05d", opt.sample_index);
  save_pgm(result.image, fs::path(cfg.out_dir) / (std::string(stem) + ".pgm"));
  save_tensor(result.latent, fs::path(cfg.out_dir) / (std::string(stem) + "_latent.tensor"));
  const FidelityReport report = region_fidelity(result.image, ds);
  std::printf("sample %d: region_error=%.6f pattern_corr=%.6f\n", opt.sample_index,
              static_cast<double>(report.mean_region_error),
              static_cast<double>(report.mean_pattern_corr));
  return 0;
}

int run_album(const CliOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  cfg.mode = RunMode::kAlbum;
  if (opt.n >= 0) cfg.frames = opt.n;
  CompositionModel model = resolve_model(cfg);
  if (model.config().mode != RunMode::kGeneration) {
    throw ModeError("album generation needs a generation-mode model");
  }
  const TextEmbedder embedder(model.config().text_dim, cfg.seed);
  const NoiseSchedule schedule = default_schedule(cfg.T);
  const AlbumInputs inputs = make_album_inputs(dataset_config_of(cfg), cfg.frames, cfg.seed);
  const int steps = cfg.steps < 0 ? schedule.T : cfg.steps;
  const LatentAlbum album =
      generate_album(model, embedder, schedule, inputs, cfg.consistency, cfg.seed, steps);
  save_album(album, inputs, cfg.out_dir);
  std::printf("album mode=%s frames=%d face_distance=%.6f garment_error=%.6f\n",
              consistency_mode_name(album.mode), cfg.frames,
              static_cast<double>(album_face_distance(album)),
              static_cast<double>(album_garment_error(album, inputs)));
  return 0;
}

int run_ablate(const CliOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  if (!opt.train_inline) {
    throw ParameterError("ablate needs --train-inline (no pre-trained runs are available)");
  }
  AblationConfig acfg;
  acfg.base = cfg;
  if (opt.n >= 0) acfg.eval_samples = opt.n;
  if (!opt.seeds_csv.empty()) {
    acfg.seeds.clear();
    std::string token;
    std::istringstream stream(opt.seeds_csv);
    while (std::getline(stream, token, ',')) {
      acfg.seeds.push_back(std::stoull(token));
    }
  }
  const std::vector<DatasetSample> data = resolve_dataset(cfg);
  const auto cells = run_ablation(acfg, data, configured_thread_count());
  fs::create_directories(cfg.out_dir);
  save_ablation_csv(cells, fs::path(cfg.out_dir) / "ablation.csv");
  for (const auto& cell : cells) {
    std::printf("%-8s seed=%llu region_error=%.6f pattern_corr=%.6f\n",
                binding_mode_name(cell.variant), static_cast<unsigned long long>(cell.seed),
                static_cast<double>(cell.region_error), static_cast<double>(cell.pattern_corr));
  }
  return 0;
}

int run_gradcheck(const CliOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  ModelConfig mcfg;
  if (opt.gradcheck_size == "small") {
    mcfg.canvas_h = 24;
    mcfg.canvas_w = 24;
    mcfg.levels = 2;
    mcfg.dims = {4, 4};
    mcfg.text_dim = 4;
    mcfg.time_dim = 4;
  } else if (opt.gradcheck_size == "micro") {
    mcfg.canvas_h = 24;
    mcfg.canvas_w = 24;
    mcfg.levels = 1;
    mcfg.dims = {4};
    mcfg.text_dim = 4;
    mcfg.time_dim = 4;
  } else {
    throw ParameterError("unknown gradcheck size '" + opt.gradcheck_size + "'");
  }
  mcfg.mode = cfg.mode == RunMode::kTryon ? RunMode::kTryon : RunMode::kGeneration;
  mcfg.binding = BindingMode::kBind123;
  mcfg.init_seed = cfg.seed;
  const GradReport report = model_gradcheck(mcfg, cfg.seed, 1e-3f, 1e-4f);
  std::fputs(format_grad_report(report).c_str(), stdout);
  if (!report.pass) throw NumericError("gradient check failed");
  return 0;
}

int run_metrics(const CliOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  if (cfg.data_dir.empty() || opt.images_dir.empty()) {
    throw ParameterError("metrics needs --data <dataset dir> and --images <generated dir>");
  }
  const std::vector<DatasetSample> data = load_dataset(cfg.data_dir);
  fs::create_directories(cfg.out_dir);
  std::ofstream csv(fs::path(cfg.out_dir) / "metrics.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write metrics.csv in " + cfg.out_dir);
  csv << "sample,asset,category,region_error,pattern_corr\n";
  int scored = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "gen_%05zu.pgm", i);
    const fs::path image_path = fs::path(opt.images_dir) / stem;
    if (!fs::exists(image_path)) continue;
    const Tensor generated = load_pgm(image_path);
    const FidelityReport report = region_fidelity(generated, data[i]);
    for (const auto& a : report.assets) {
      char line[160];
      std::snprintf(line, sizeof(line), "%zu,%d,%s,%.9g,%.9g\n", i, a.asset_index,
                    category_name(a.category), static_cast<double>(a.region_error),
                    static_cast<double>(a.pattern_corr));
      csv << line;
    }
    ++scored;
  }
  std::printf("scored %d generated images\n", scored);
  if (scored == 0) throw ParameterError("no gen_*.pgm images matched the dataset");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliOptions opt;
  CLI::App app{"deterministic compositional diffusion sandbox"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON run config");
    sub->add_option("--seed", opt.seed, "master seed")->each([&](const std::string&) {
      opt.seed_set = true;
    });
    sub->add_option("--out", opt.out_dir, "output directory");
  };

  CLI::App* gen = app.add_subcommand("gen-dataset", "generate a synthetic dataset");
  add_common(gen);
  gen->add_option("--n", opt.n, "sample count");
  gen->add_option("--mode", opt.mode, "generation|tryon|album");

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd);
  train_cmd->add_option("--data", opt.data_dir, "dataset directory");
  train_cmd->add_option("--steps", opt.steps, "training steps")->each([&](const std::string&) {
    opt.steps_set = true;
  });
  train_cmd->add_option("--mode", opt.mode, "generation|tryon");
  train_cmd->add_option("--binding", opt.binding, "none|bind1|bind123|convin");

  CLI::App* sample_cmd = app.add_subcommand("sample", "generate one image");
  CLI::App* tryon_cmd = app.add_subcommand("tryon", "garment try-on for one sample");
  for (CLI::App* sub : {sample_cmd, tryon_cmd}) {
    add_common(sub);
    sub->add_option("--data", opt.data_dir, "dataset directory");
    sub->add_option("--ckpt", opt.checkpoint_dir, "checkpoint directory");
    sub->add_option("--steps", opt.steps, "reverse steps")->each([&](const std::string&) {
      opt.steps_set = true;
    });
    sub->add_option("--index", opt.sample_index, "dataset sample index");
    sub->add_option("--binding", opt.binding, "none|bind1|bind123|convin");
  }

  CLI::App* album_cmd = app.add_subcommand("album", "generate a consistent album");
  add_common(album_cmd);
  album_cmd->add_option("--ckpt", opt.checkpoint_dir, "checkpoint directory");
  album_cmd->add_option("--n", opt.n, "frame count");
  album_cmd->add_option("--consistency", opt.consistency, "independent|cfa|caa|lca");
  album_cmd->add_option("--steps", opt.steps, "reverse steps")->each([&](const std::string&) {
    opt.steps_set = true;
  });
  album_cmd->add_option("--binding", opt.binding, "none|bind1|bind123|convin");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "binding-variant ablation grid");
  add_common(ablate_cmd);
  ablate_cmd->add_option("--data", opt.data_dir, "dataset directory");
  ablate_cmd->add_option("--seeds", opt.seeds_csv, "comma-separated seeds");
  ablate_cmd->add_option("--n", opt.n, "eval samples per cell");
  ablate_cmd->add_flag("--train-inline", opt.train_inline, "train each cell now");

  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheck_cmd);
  gradcheck_cmd->add_option("--size", opt.gradcheck_size, "small|micro");
  gradcheck_cmd->add_option("--mode", opt.mode, "generation|tryon");

  CLI::App* metrics_cmd = app.add_subcommand("metrics", "score generated images");
  add_common(metrics_cmd);
  metrics_cmd->add_option("--data", opt.data_dir, "dataset directory");
  metrics_cmd->add_option("--images", opt.images_dir, "directory of gen_*.pgm files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen_dataset(opt);
    if (train_cmd->parsed()) return run_train(opt);
    if (sample_cmd->parsed()) return run_sample(opt, RunMode::kGeneration);
    if (tryon_cmd->parsed()) return run_sample(opt, RunMode::kTryon);
    if (album_cmd->parsed()) return run_album(opt);
    if (ablate_cmd->parsed()) return run_ablate(opt);
    if (gradcheck_cmd->parsed()) return run_gradcheck(opt);
    if (metrics_cmd->parsed()) return run_metrics(opt);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}

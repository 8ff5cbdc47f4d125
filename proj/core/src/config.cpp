#include "composer/config.hpp"

#include <fstream>

#include "composer/errors.hpp"
#include "composer/train.hpp"
#include "json.hpp"

namespace composer {

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  try {
    c.mode = run_mode_from_name(j.at("mode").get<std::string>());
    c.canvas_h = j.at("canvas_h").get<int>();
    c.canvas_w = j.at("canvas_w").get<int>();
    c.T = j.at("T").get<int>();
    c.steps = j.at("steps").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.binding = binding_mode_from_name(j.at("binding").get<std::string>());
    c.consistency = consistency_mode_from_name(j.at("consistency").get<std::string>());
    c.data_dir = j.at("data_dir").get<std::string>();
    c.out_dir = j.at("out_dir").get<std::string>();
    c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
    c.dims = j.at("dims").get<std::vector<int>>();
    c.text_dim = j.at("text_dim").get<int>();
    c.time_dim = j.at("time_dim").get<int>();
    c.train_steps = j.at("train_steps").get<int>();
    c.lr = j.at("lr").get<float>();
    c.weight_decay = j.at("weight_decay").get<float>();
    c.dataset_count = j.at("dataset_count").get<int>();
    c.categories.clear();
    for (const auto& name : j.at("categories")) {
      const std::string s = name.get<std::string>();
      bool found = false;
      for (int i = 0; i < kCategoryCount; ++i) {
        if (s == category_name(static_cast<Category>(i))) {
          c.categories.push_back(static_cast<Category>(i));
          found = true;
        }
      }
      if (!found) throw ParameterError("config: unknown category '" + s + "'");
    }
    c.frames = j.at("frames").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("config " + path.string() + ": " + e.what());
  }
  return c;
}

void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
  std::vector<std::string> cats;
  for (Category cat : c.categories) cats.push_back(category_name(cat));
  nlohmann::json j{{"mode", run_mode_name(c.mode)},
                   {"canvas_h", c.canvas_h},
                   {"canvas_w", c.canvas_w},
                   {"T", c.T},
                   {"steps", c.steps},
                   {"seed", c.seed},
                   {"binding", binding_mode_name(c.binding)},
                   {"consistency", consistency_mode_name(c.consistency)},
                   {"data_dir", c.data_dir},
                   {"out_dir", c.out_dir},
                   {"checkpoint_dir", c.checkpoint_dir},
                   {"dims", c.dims},
                   {"text_dim", c.text_dim},
                   {"time_dim", c.time_dim},
                   {"train_steps", c.train_steps},
                   {"lr", c.lr},
                   {"weight_decay", c.weight_decay},
                   {"dataset_count", c.dataset_count},
                   {"categories", cats},
                   {"frames", c.frames}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write config " + path.string());
  out << j.dump(2) << "\n";
}

ModelConfig model_config_of(const RunConfig& config) {
  ModelConfig m;
  m.canvas_h = config.canvas_h;
  m.canvas_w = config.canvas_w;
  m.levels = static_cast<int>(config.dims.size());
  m.dims = config.dims;
  m.text_dim = config.text_dim;
  m.time_dim = config.time_dim;
  m.mode = config.mode == RunMode::kTryon ? RunMode::kTryon : RunMode::kGeneration;
  m.binding = config.binding;
  m.init_seed = config.seed;
  return m;
}

DatasetConfig dataset_config_of(const RunConfig& config) {
  DatasetConfig d;
  d.count = config.dataset_count;
  d.canvas_h = config.canvas_h;
  d.canvas_w = config.canvas_w;
  d.categories = config.categories;
  d.seed = config.seed;
  return d;
}

TrainConfig train_config_of(const RunConfig& config) {
  TrainConfig t;
  t.steps = config.train_steps;
  t.lr = config.lr;
  t.weight_decay = config.weight_decay;
  t.T = config.T;
  t.seed = config.seed;
  return t;
}

}  // namespace composer

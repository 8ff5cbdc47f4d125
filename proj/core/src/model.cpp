#include "composer/model.hpp"

#include <cmath>
#include <fstream>

#include "composer/errors.hpp"
#include "composer/rng.hpp"
#include "composer/tensor_io.hpp"
#include "json.hpp"

namespace composer {

const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::kGeneration:
      return "generation";
    case RunMode::kTryon:
      return "tryon";
    case RunMode::kAlbum:
      return "album";
  }
  return "?";
}

const char* binding_mode_name(BindingMode b) {
  switch (b) {
    case BindingMode::kNone:
      return "none";
    case BindingMode::kBind1:
      return "bind1";
    case BindingMode::kBind123:
      return "bind123";
    case BindingMode::kConvInMask:
      return "convin";
  }
  return "?";
}

RunMode run_mode_from_name(const std::string& s) {
  for (RunMode m : {RunMode::kGeneration, RunMode::kTryon, RunMode::kAlbum}) {
    if (s == run_mode_name(m)) return m;
  }
  throw ParameterError("unknown mode '" + s + "'");
}

BindingMode binding_mode_from_name(const std::string& s) {
  for (BindingMode b :
       {BindingMode::kNone, BindingMode::kBind1, BindingMode::kBind123, BindingMode::kConvInMask}) {
    if (s == binding_mode_name(b)) return b;
  }
  throw ParameterError("unknown binding '" + s + "'");
}

bool ModelConfig::binding_at_block(int block_id) const {
  switch (binding) {
    case BindingMode::kBind123:
      return true;
    case BindingMode::kBind1:
      return block_id == levels;  // smallest resolution only
    default:
      return false;
  }
}

std::vector<BlockDims> ModelConfig::block_dims() const {
  std::vector<BlockDims> blocks;
  for (int l = 0; l < levels; ++l) blocks.push_back({l + 1, block_h(l), block_w(l)});
  return blocks;
}

void ModelConfig::validate() const {
  if (levels < 1) throw ParameterError("model: levels must be >= 1");
  if (static_cast<int>(dims.size()) != levels) {
    throw ParameterError("model: dims size " + std::to_string(dims.size()) + " != levels " +
                         std::to_string(levels));
  }
  if (canvas_h % 2 != 0 || canvas_w % 2 != 0) {
    throw ParameterError("model: canvas dims must be even");
  }
  // Every level must keep an integral token grid after its downsamplings.
  const int need = 1 << (levels - 1);
  if (latent_h() % need != 0 || latent_w() % need != 0) {
    throw ParameterError("model: latent " + std::to_string(latent_h()) + "x" +
                         std::to_string(latent_w()) + " not divisible across " +
                         std::to_string(levels) + " levels");
  }
  for (int d : dims) {
    if (d < 1) throw ParameterError("model: token dims must be >= 1");
  }
  if (text_dim < 1 || time_dim < 2) throw ParameterError("model: bad text/time dims");
}

void ParamStore::add(const std::string& name, Tensor t) {
  if (values.count(name)) throw ParameterError("duplicate parameter '" + name + "'");
  names.push_back(name);
  values.emplace(name, std::move(t));
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = values.find(name);
  if (it == values.end()) throw ParameterError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw ParameterError("unknown parameter '" + name + "'");
  return it->second;
}

std::int64_t ParamStore::total_numel() const {
  std::int64_t n = 0;
  for (const auto& name : names) n += values.at(name).numel();
  return n;
}

GraphParams GraphParams::wrap(const ParamStore& store, bool requires_grad) {
  GraphParams g;
  g.order = store.names;
  for (const auto& name : store.names) {
    g.vars.emplace(name, ad::leaf(store.values.at(name), requires_grad));
  }
  return g;
}

const ad::VarPtr& GraphParams::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw ParameterError("graph: unknown parameter '" + name + "'");
  return it->second;
}

std::vector<KVPair> RefTaps::to_kv_pairs() const {
  std::vector<KVPair> out;
  for (size_t i = 0; i < keys.size(); ++i) {
    out.push_back({keys[i]->value, values[i]->value, static_cast<int>(i) + 1});
  }
  return out;
}

Tensor timestep_embedding(int t, int dim) {
  Tensor emb({1, dim});
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const float freq =
        std::exp(-std::log(10000.0f) * static_cast<float>(i) / static_cast<float>(half));
    emb(0, i) = std::sin(static_cast<float>(t) * freq);
    emb(0, half + i) = std::cos(static_cast<float>(t) * freq);
  }
  return emb;
}

CompositionModel::CompositionModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  init_params();
}

namespace {

// Every tensor gets its own stream keyed by name, so two configs that share
// a parameter name initialize it identically from the same seed.
Tensor init_matrix(std::uint64_t seed, const std::string& name, int rows, int cols) {
  Rng rng = Rng(seed).derive(name);
  Tensor t = rng.normal_tensor({rows, cols});
  const float s = 1.0f / std::sqrt(static_cast<float>(rows));
  for (auto& v : t.raw()) v *= s;
  return t;
}

}  // namespace

void CompositionModel::init_params() {
  const std::uint64_t seed = config_.init_seed;
  auto mat = [&](const std::string& name, int rows, int cols) {
    params_.add(name, init_matrix(seed, name, rows, cols));
  };
  // Residual output projections start at zero: the net begins as the
  // all-zeros predictor and every block fades in through training.
  auto zero_mat = [&](const std::string& name, int rows, int cols) {
    params_.add(name, Tensor({rows, cols}));
  };
  auto bias = [&](const std::string& name, int d) { params_.add(name, Tensor({1, d})); };

  const int d1 = config_.dims[0];
  mat("den.conv_in.w", config_.conv_in_channels(), d1);
  bias("den.conv_in.b", d1);
  mat("ref.conv_in.w", config_.ref_conv_in_channels(), d1);
  bias("ref.conv_in.b", d1);

  for (const char* net : {"den", "ref"}) {
    for (int l = 0; l < config_.levels; ++l) {
      const int d = config_.dims[static_cast<size_t>(l)];
      const std::string base = std::string(net) + ".l" + std::to_string(l + 1) + ".";
      // FiLM conditioning: x * (1 + scale(temb)) + shift(temb). The noise
      // target's slope on z_t depends on t, so the gain term is load-bearing.
      mat(base + "time.scale.w", config_.time_dim, d);
      bias(base + "time.scale.b", d);
      mat(base + "time.shift.w", config_.time_dim, d);
      bias(base + "time.shift.b", d);
      for (const char* w : {"wq", "wk", "wv"}) mat(base + "sa." + w, d, d);
      zero_mat(base + "sa.wo", d, d);
      mat(base + "ca.wq", d, d);
      mat(base + "ca.wk", config_.text_dim, d);
      mat(base + "ca.wv", config_.text_dim, d);
      zero_mat(base + "ca.wo", d, d);
      mat(base + "ffn.w1", d, 2 * d);
      bias(base + "ffn.b1", 2 * d);
      zero_mat(base + "ffn.w2", 2 * d, d);
      bias(base + "ffn.b2", d);
    }
    for (int l = 0; l + 1 < config_.levels; ++l) {
      const std::string name = std::string(net) + ".down" + std::to_string(l + 1);
      mat(name + ".w", 4 * config_.dims[static_cast<size_t>(l)],
          config_.dims[static_cast<size_t>(l) + 1]);
      bias(name + ".b", config_.dims[static_cast<size_t>(l) + 1]);
    }
  }
  // Decoder exists on the denoiser only; the reference net is encoder-only.
  for (int l = config_.levels - 1; l >= 1; --l) {
    const std::string name = "den.up" + std::to_string(l);
    mat(name + ".w", config_.dims[static_cast<size_t>(l)], 4 * config_.dims[static_cast<size_t>(l) - 1]);
    bias(name + ".b", 4 * config_.dims[static_cast<size_t>(l) - 1]);
  }
  zero_mat("den.conv_out.w", d1, 4);
  bias("den.conv_out.b", 4);

  for (int l = 0; l < config_.levels; ++l) {
    const int block_id = l + 1;
    if (!config_.binding_at_block(block_id)) continue;
    const int d = config_.dims[static_cast<size_t>(l)];
    const std::string base = "bind.l" + std::to_string(block_id) + ".";
    mat(base + "w1", config_.text_dim, d);
    bias(base + "b1", d);
    // Final layer zero-initialized: binding starts as an exact no-op.
    params_.add(base + "w2", Tensor({d, d}));
    bias(base + "b2", d);
  }
}

namespace {

using ad::VarPtr;

// [n x d] tokens -> [d, h, w] spatial layout.
VarPtr tokens_to_spatial(const VarPtr& x, int d, int h, int w) {
  return ad::reshape(ad::transpose(x), {d, h, w});
}

// [d, h, w] -> [n x d] tokens.
VarPtr spatial_to_tokens(const VarPtr& x, int d, int h, int w) {
  return ad::transpose(ad::reshape(x, {d, h * w}));
}

VarPtr linear(const GraphParams& p, const std::string& base, const VarPtr& x) {
  return ad::add_row_broadcast(ad::matmul(x, p.at(base + ".w")), p.at(base + ".b"));
}

VarPtr cross_attention(const GraphParams& p, const std::string& base, const VarPtr& x,
                       const VarPtr& text) {
  VarPtr q = ad::matmul(x, p.at(base + ".wq"));
  VarPtr k = ad::matmul(text, p.at(base + ".wk"));
  VarPtr v = ad::matmul(text, p.at(base + ".wv"));
  VarPtr attn = ad::scaled_dot_attention(q, k, v);
  return ad::add(x, ad::matmul(attn, p.at(base + ".wo")));
}

VarPtr time_condition(const GraphParams& p, const std::string& base, const VarPtr& x, int t,
                      int time_dim) {
  VarPtr emb = ad::constant(timestep_embedding(t, time_dim));
  VarPtr gain = ad::add(ad::constant(Tensor::full({1, x->value.cols()}, 1.0f)),
                        linear(p, base + ".scale", emb));
  VarPtr shift = linear(p, base + ".shift", emb);
  return ad::add_row_broadcast(ad::mul_row_broadcast(x, gain), shift);
}

VarPtr feed_forward(const GraphParams& p, const std::string& base, const VarPtr& x) {
  VarPtr hidden = ad::gelu(ad::add_row_broadcast(ad::matmul(x, p.at(base + ".w1")),
                                                 p.at(base + ".b1")));
  return ad::add(x, ad::add_row_broadcast(ad::matmul(hidden, p.at(base + ".w2")),
                                          p.at(base + ".b2")));
}

// Graph version of the binding MLP; arithmetic matches BlockBindingMLP::apply.
VarPtr binding_vector(const GraphParams& p, int block_id, const Tensor& pooled) {
  const std::string base = "bind.l" + std::to_string(block_id) + ".";
  VarPtr in = ad::constant(Tensor({1, pooled.dim(0)}, pooled.raw()));
  VarPtr hidden = ad::gelu(ad::add_row_broadcast(ad::matmul(in, p.at(base + "w1")), p.at(base + "b1")));
  return ad::add_row_broadcast(ad::matmul(hidden, p.at(base + "w2")), p.at(base + "b2"));
}

}  // namespace

RefTaps CompositionModel::reference_forward(const GraphParams& p, const Tensor& ref_input,
                                            const Tensor& text,
                                            const std::vector<TokenSelection>& selections,
                                            const std::vector<PhraseEmbedding>& phrases) const {
  if (ref_input.ndim() != 3 || ref_input.dim(0) != config_.ref_conv_in_channels()) {
    throw ModeError("reference input must have " +
                    std::to_string(config_.ref_conv_in_channels()) + " channels, got " +
                    shape_str(ref_input.shape()));
  }
  if (static_cast<int>(selections.size()) != config_.levels) {
    throw DimensionError("reference_forward: " + std::to_string(selections.size()) +
                         " selections for " + std::to_string(config_.levels) + " blocks");
  }

  const int c_in = ref_input.dim(0);
  const int lh = ref_input.dim(1), lw = ref_input.dim(2);
  VarPtr text_var = ad::constant(text);
  VarPtr x = spatial_to_tokens(ad::constant(ref_input), c_in, lh, lw);
  x = linear(p, "ref.conv_in", x);

  RefTaps taps;
  for (int l = 0; l < config_.levels; ++l) {
    const int block_id = l + 1;
    const int d = config_.dims[static_cast<size_t>(l)];
    const std::string base = "ref.l" + std::to_string(block_id) + ".";
    x = time_condition(p, base + "time", x, 0, config_.time_dim);

    VarPtr q = ad::matmul(x, p.at(base + "sa.wq"));
    VarPtr k = ad::matmul(x, p.at(base + "sa.wk"));
    VarPtr v = ad::matmul(x, p.at(base + "sa.wv"));

    if (config_.binding_at_block(block_id)) {
      const TokenSelection& sel = selections[static_cast<size_t>(l)];
      for (size_t asset = 0; asset < sel.asset_tokens.size(); ++asset) {
        if (sel.asset_tokens[asset].empty()) continue;
        const PhraseEmbedding* phrase = nullptr;
        for (const auto& pe : phrases) {
          if (pe.asset_index == static_cast<int>(asset)) phrase = &pe;
        }
        if (phrase == nullptr) {
          throw BindingError("reference_forward: asset " + std::to_string(asset) +
                             " selected at block " + std::to_string(block_id) +
                             " has no phrase embedding");
        }
        VarPtr g = binding_vector(p, block_id, phrase->pooled);
        k = ad::scatter_add_rows(k, g, sel.asset_tokens[asset]);
        v = ad::scatter_add_rows(v, g, sel.asset_tokens[asset]);
      }
    }

    taps.keys.push_back(k);
    taps.values.push_back(v);

    VarPtr attn = ad::scaled_dot_attention(q, k, v);
    x = ad::add(x, ad::matmul(attn, p.at(base + "sa.wo")));
    x = cross_attention(p, base + "ca", x, text_var);
    x = feed_forward(p, base + "ffn", x);

    if (l + 1 < config_.levels) {
      VarPtr spatial = tokens_to_spatial(x, d, config_.block_h(l), config_.block_w(l));
      VarPtr packed = ad::space_to_depth(spatial);
      x = spatial_to_tokens(packed, 4 * d, config_.block_h(l + 1), config_.block_w(l + 1));
      x = linear(p, "ref.down" + std::to_string(l + 1), x);
    }
  }
  return taps;
}

ad::VarPtr CompositionModel::denoiser_forward(const GraphParams& p, const Tensor& model_input,
                                              int t, const Tensor& text, const RefTaps* taps,
                                              const KVInterceptor& interceptor) const {
  if (model_input.ndim() != 3 || model_input.dim(0) != config_.conv_in_channels()) {
    throw ModeError("denoiser input must have " + std::to_string(config_.conv_in_channels()) +
                    " channels in " + run_mode_name(config_.mode) + " mode, got " +
                    shape_str(model_input.shape()));
  }
  if (taps != nullptr && static_cast<int>(taps->keys.size()) != config_.levels) {
    throw DimensionError("denoiser_forward: " + std::to_string(taps->keys.size()) +
                         " taps for " + std::to_string(config_.levels) + " blocks");
  }

  const int c_in = model_input.dim(0);
  const int lh = model_input.dim(1), lw = model_input.dim(2);
  VarPtr text_var = ad::constant(text);
  VarPtr x = spatial_to_tokens(ad::constant(model_input), c_in, lh, lw);
  x = linear(p, "den.conv_in", x);

  std::vector<VarPtr> skips;
  for (int l = 0; l < config_.levels; ++l) {
    const int block_id = l + 1;
    const int d = config_.dims[static_cast<size_t>(l)];
    const std::string base = "den.l" + std::to_string(block_id) + ".";
    x = time_condition(p, base + "time", x, t, config_.time_dim);

    VarPtr q = ad::matmul(x, p.at(base + "sa.wq"));
    VarPtr k = ad::matmul(x, p.at(base + "sa.wk"));
    VarPtr v = ad::matmul(x, p.at(base + "sa.wv"));
    if (interceptor) {
      auto [k2, v2] = interceptor(block_id, k->value, v->value);
      k = ad::constant(std::move(k2));
      v = ad::constant(std::move(v2));
    }
    if (taps != nullptr) {
      k = ad::concat_rows(k, taps->keys[static_cast<size_t>(l)]);
      v = ad::concat_rows(v, taps->values[static_cast<size_t>(l)]);
    }
    VarPtr attn = ad::scaled_dot_attention(q, k, v);
    x = ad::add(x, ad::matmul(attn, p.at(base + "sa.wo")));
    x = cross_attention(p, base + "ca", x, text_var);
    x = feed_forward(p, base + "ffn", x);

    if (l + 1 < config_.levels) {
      skips.push_back(x);
      VarPtr spatial = tokens_to_spatial(x, d, config_.block_h(l), config_.block_w(l));
      x = spatial_to_tokens(ad::space_to_depth(spatial), 4 * d, config_.block_h(l + 1),
                            config_.block_w(l + 1));
      x = linear(p, "den.down" + std::to_string(l + 1), x);
    }
  }

  for (int l = config_.levels - 1; l >= 1; --l) {
    const int d_coarse_h = config_.block_h(l), d_coarse_w = config_.block_w(l);
    const int d_fine = config_.dims[static_cast<size_t>(l) - 1];
    x = linear(p, "den.up" + std::to_string(l), x);  // [n_l x 4*d_fine]
    VarPtr spatial = tokens_to_spatial(x, 4 * d_fine, d_coarse_h, d_coarse_w);
    x = spatial_to_tokens(ad::depth_to_space(spatial), d_fine, config_.block_h(l - 1),
                          config_.block_w(l - 1));
    x = ad::add(x, skips[static_cast<size_t>(l) - 1]);
  }

  VarPtr out = linear(p, "den.conv_out", x);  // [n1 x 4]
  return ad::reshape(ad::transpose(out), {4, lh, lw});
}

BlockBindingMLP CompositionModel::binding_mlp(int block_id) const {
  const std::string base = "bind.l" + std::to_string(block_id) + ".";
  if (!params_.has(base + "w1")) {
    throw ParameterError("no binding MLP at block " + std::to_string(block_id) + " for mode " +
                         binding_mode_name(config_.binding));
  }
  BlockBindingMLP mlp;
  mlp.block_id = block_id;
  mlp.w1 = params_.at(base + "w1");
  const Tensor& b1 = params_.at(base + "b1");
  mlp.b1 = Tensor({b1.cols()}, b1.raw());
  mlp.w2 = params_.at(base + "w2");
  const Tensor& b2 = params_.at(base + "b2");
  mlp.b2 = Tensor({b2.cols()}, b2.raw());
  return mlp;
}

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"canvas_h", c.canvas_h},
                        {"canvas_w", c.canvas_w},
                        {"levels", c.levels},
                        {"dims", c.dims},
                        {"text_dim", c.text_dim},
                        {"time_dim", c.time_dim},
                        {"mode", run_mode_name(c.mode)},
                        {"binding", binding_mode_name(c.binding)},
                        {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.canvas_h = j.at("canvas_h").get<int>();
  c.canvas_w = j.at("canvas_w").get<int>();
  c.levels = j.at("levels").get<int>();
  c.dims = j.at("dims").get<std::vector<int>>();
  c.text_dim = j.at("text_dim").get<int>();
  c.time_dim = j.at("time_dim").get<int>();
  c.mode = run_mode_from_name(j.at("mode").get<std::string>());
  c.binding = binding_mode_from_name(j.at("binding").get<std::string>());
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void CompositionModel::save_checkpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["config"] = config_to_json(config_);
  nlohmann::json params = nlohmann::json::object();
  for (size_t i = 0; i < params_.names.size(); ++i) {
    const std::string& name = params_.names[i];
    const std::string file = "p" + std::to_string(i) + ".tensor";
    save_tensor(params_.values.at(name), dir / file);
    params[name] = {{"file", file}, {"shape", params_.values.at(name).shape()}};
  }
  manifest["params"] = params;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

CompositionModel CompositionModel::load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read checkpoint manifest in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  CompositionModel model(config_from_json(manifest.at("config")));
  for (const std::string& name : model.params_.names) {
    const auto& entry = manifest.at("params").at(name);
    Tensor t = load_tensor(dir / entry.at("file").get<std::string>());
    if (t.shape() != model.params_.at(name).shape()) {
      throw DimensionError("checkpoint: shape mismatch for '" + name + "'");
    }
    model.params_.at(name) = std::move(t);
  }
  return model;
}

ModelConfig model_config_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read model config " + path.string());
  return config_from_json(nlohmann::json::parse(in));
}

}  // namespace composer

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "composer/attention.hpp"
#include "composer/autodiff.hpp"
#include "composer/compose.hpp"
#include "composer/tensor.hpp"

namespace composer {

enum class RunMode : int { kGeneration = 0, kTryon = 1, kAlbum = 2 };

/// Where subject-binding applies. kBind1 follows the ablation naming: only
/// the smallest-resolution block (the highest block id) is augmented;
/// kBind123 augments every block. kConvInMask skips binding and instead
/// feeds the asset-index mask to the reference net's conv-in.
enum class BindingMode : int { kNone = 0, kBind1 = 1, kBind123 = 2, kConvInMask = 3 };

const char* run_mode_name(RunMode m);
const char* binding_mode_name(BindingMode b);
RunMode run_mode_from_name(const std::string& s);
BindingMode binding_mode_from_name(const std::string& s);

struct ModelConfig {
  int canvas_h = 64;
  int canvas_w = 48;
  int levels = 3;
  std::vector<int> dims = {8, 16, 32};  // token dim per block, ids 1..levels
  int text_dim = 16;
  int time_dim = 16;
  RunMode mode = RunMode::kGeneration;
  BindingMode binding = BindingMode::kNone;
  std::uint64_t init_seed = 1;

  int latent_h() const { return canvas_h / 2; }
  int latent_w() const { return canvas_w / 2; }
  int block_h(int level) const { return latent_h() >> level; }  // level is 0-based
  int block_w(int level) const { return latent_w() >> level; }

  /// Denoiser conv-in width: 4 latent + 2 densepose channels in generation,
  /// 4 latent + 4 agnostic + 1 mask in try-on.
  int conv_in_channels() const { return mode == RunMode::kTryon ? 9 : 6; }
  /// Reference net is latent-only, plus one mask channel under kConvInMask.
  int ref_conv_in_channels() const { return binding == BindingMode::kConvInMask ? 5 : 4; }

  bool binding_at_block(int block_id) const;
  std::vector<BlockDims> block_dims() const;
  void validate() const;
};

/// Ordered name -> tensor map; iteration order is the insertion order and is
/// identical across runs.
struct ParamStore {
  std::vector<std::string> names;
  std::unordered_map<std::string, Tensor> values;

  void add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return values.count(name) != 0; }
  std::int64_t total_numel() const;
};

/// Per-graph wrapping of a ParamStore into autodiff leaves.
struct GraphParams {
  std::vector<std::string> order;
  std::unordered_map<std::string, ad::VarPtr> vars;

  static GraphParams wrap(const ParamStore& store, bool requires_grad);
  const ad::VarPtr& at(const std::string& name) const;
};

/// Intercepts a denoiser self-attention site's own key/value tokens before
/// reference concatenation. Returning new tensors substitutes them
/// (inference-time only; the substituted tokens are treated as constants).
using KVInterceptor =
    std::function<std::pair<Tensor, Tensor>(int block_id, const Tensor& k, const Tensor& v)>;

/// Bound reference K/V taps, one per block.
struct RefTaps {
  std::vector<ad::VarPtr> keys;
  std::vector<ad::VarPtr> values;

  std::vector<KVPair> to_kv_pairs() const;
};

/// The denoiser and reference network bundled with the binding MLPs.
/// Both nets share the topology: conv-in, then per resolution level a
/// timestep add, one self-attention site and one text cross-attention site,
/// with space-to-depth transitions between levels and a skip-connected
/// decoder on the denoiser side. The reference net runs encoder-only at
/// t = 0 and exposes its (bound) K/V per block.
class CompositionModel {
 public:
  explicit CompositionModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Reference pass over the encoded composition [4 or 5, lh, lw].
  /// Binding (per config) is applied to each block's K/V before its own
  /// attention, and the bound tokens are tapped for injection.
  RefTaps reference_forward(const GraphParams& p, const Tensor& ref_input, const Tensor& text,
                            const std::vector<TokenSelection>& selections,
                            const std::vector<PhraseEmbedding>& phrases) const;

  /// Denoiser pass over [conv_in_channels, lh, lw] at timestep t. `taps`
  /// enables feature injection; `interceptor` enables album-mode K/V capture
  /// and substitution. Returns predicted noise [4, lh, lw].
  ad::VarPtr denoiser_forward(const GraphParams& p, const Tensor& model_input, int t,
                              const Tensor& text, const RefTaps* taps,
                              const KVInterceptor& interceptor = nullptr) const;

  /// Value-path binding MLP view over the stored parameters.
  BlockBindingMLP binding_mlp(int block_id) const;

  void save_checkpoint(const std::filesystem::path& dir) const;
  static CompositionModel load_checkpoint(const std::filesystem::path& dir);

 private:
  void init_params();

  ModelConfig config_;
  ParamStore params_;
};

/// Sinusoidal timestep embedding [1 x dim]; first half sines, second half
/// cosines, geometric frequency ladder.
Tensor timestep_embedding(int t, int dim);

ModelConfig model_config_from_json_file(const std::filesystem::path& path);

}  // namespace composer

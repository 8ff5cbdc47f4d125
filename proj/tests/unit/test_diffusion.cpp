#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <set>

#include "composer/config.hpp"
#include "composer/errors.hpp"
#include "composer/pipeline.hpp"
#include "composer/train.hpp"
#include "doctest.h"

using namespace composer;

TEST_CASE("schedule matches the cumulative-product oracle") {
  const NoiseSchedule s = make_schedule(2, 0.1f, 0.2f);
  CHECK(s.betas[0] == 0.1f);
  CHECK(s.betas[1] == 0.2f);
  CHECK(s.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(s.alpha_bars[1] == doctest::Approx(0.72).epsilon(1e-6));
  // Exact f32 cumprod replay.
  float bar = 1.0f;
  for (int i = 0; i < s.T; ++i) {
    bar *= 1.0f - s.betas[static_cast<size_t>(i)];
    CHECK(s.alpha_bars[static_cast<size_t>(i)] == bar);
  }
}

TEST_CASE("single-step schedule and monotonicity") {
  const NoiseSchedule one = make_schedule(1, 0.3f, 0.9f);
  CHECK(one.alpha_bars[0] == 1.0f - 0.3f);
  const NoiseSchedule s = default_schedule(100);
  for (int i = 1; i < s.T; ++i) {
    CHECK(s.alpha_bars[static_cast<size_t>(i)] < s.alpha_bars[static_cast<size_t>(i) - 1]);
  }
  CHECK(s.alpha_bars[static_cast<size_t>(s.T) - 1] > 0.0f);
}

TEST_CASE("schedule bounds are validated") {
  CHECK_THROWS_AS(make_schedule(0, 0.1f, 0.2f), ParameterError);
  CHECK_THROWS_AS(make_schedule(10, 0.0f, 0.2f), ParameterError);
  CHECK_THROWS_AS(make_schedule(10, 0.3f, 0.2f), ParameterError);
  CHECK_THROWS_AS(make_schedule(10, 0.1f, 1.0f), ParameterError);
}

TEST_CASE("forward diffuse closed forms") {
  const NoiseSchedule s = make_schedule(2, 0.1f, 0.2f);
  Rng rng(1);
  const Tensor z0 = rng.normal_tensor({2, 3});
  const Tensor zero({2, 3});
  const Tensor noiseless = forward_diffuse(z0, 2, zero, s);
  for (std::int64_t i = 0; i < z0.numel(); ++i) {
    CHECK(noiseless.data()[i] == doctest::Approx(std::sqrt(0.72f) * z0.data()[i]).epsilon(1e-6));
  }
  const Tensor eps = rng.normal_tensor({2, 3});
  const Tensor diffused = forward_diffuse(z0, 2, eps, s);
  for (std::int64_t i = 0; i < z0.numel(); ++i) {
    CHECK(diffused.data()[i] ==
          doctest::Approx(0.8485f * z0.data()[i] + 0.5292f * eps.data()[i]).epsilon(1e-3));
  }
  CHECK_THROWS_AS(forward_diffuse(z0, 3, eps, s), ParameterError);
  CHECK_THROWS_AS(forward_diffuse(z0, 0, eps, s), ParameterError);
}

TEST_CASE("forward diffuse matches the marginal variance") {
  const NoiseSchedule s = default_schedule(50);
  Rng rng(2);
  Tensor z0 = rng.uniform_tensor({8, 8}, -1.0f, 1.0f);
  double z0_mean = 0.0;
  for (float v : z0.raw()) z0_mean += v;
  z0_mean /= static_cast<double>(z0.numel());
  double z0_var = 0.0;
  for (float v : z0.raw()) z0_var += (v - z0_mean) * (v - z0_mean);
  z0_var /= static_cast<double>(z0.numel());

  for (int t : {1, 25, 50}) {
    double sum = 0.0, sum2 = 0.0;
    const int draws = 4000;
    for (int i = 0; i < draws; ++i) {
      const Tensor z_t = forward_diffuse(z0, t, rng.normal_tensor({8, 8}), s);
      for (float v : z_t.raw()) {
        sum += v;
        sum2 += static_cast<double>(v) * v;
      }
    }
    const double n = static_cast<double>(draws) * z0.numel();
    const double var = sum2 / n - (sum / n) * (sum / n);
    const double abar = s.alpha_bar(t);
    const double expected = abar * z0_var + (1.0 - abar);
    CHECK(std::fabs(var - expected) <= 0.05 * expected);
  }
}

TEST_CASE("codec is exactly invertible and preserves values") {
  LatentCodec codec;
  Tensor img({4, 4, 1});
  for (int i = 0; i < 16; ++i) img.data()[i] = 0.01f * static_cast<float>(i) + 0.3f;
  const Tensor latent = codec.encode(img);
  REQUIRE(latent.shape() == std::vector<int>{4, 2, 2});
  // Cell (0,0) carries pixels (0,0),(0,1),(1,0),(1,1) in channel order.
  CHECK(latent(0, 0, 0) == img(0, 0, 0));
  CHECK(latent(1, 0, 0) == img(0, 1, 0));
  CHECK(latent(2, 0, 0) == img(1, 0, 0));
  CHECK(latent(3, 0, 0) == img(1, 1, 0));
  CHECK(bit_equal(codec.decode(latent), img));
  // Value multiset preserved.
  std::multiset<float> a(img.raw().begin(), img.raw().end());
  std::multiset<float> b(latent.raw().begin(), latent.raw().end());
  CHECK(a == b);
  CHECK_THROWS_AS(codec.encode(Tensor({3, 4, 1})), DimensionError);
}

TEST_CASE("text embedder is a deterministic lookup with mean-pooled phrases") {
  const TextEmbedder emb(16, 7);
  const TextEmbedder emb2(16, 7);
  CHECK(bit_equal(emb.table(), emb2.table()));

  TextPrompt p;
  p.tokens = {3, 5, 3};
  const Tensor rows = emb.embed(p);
  for (int c = 0; c < 16; ++c) CHECK(rows(0, c) == rows(2, c));

  const PhraseEmbedding single = emb.phrase_embedding(p, {0, 1, 2});
  for (int c = 0; c < 16; ++c) CHECK(single.pooled.data()[c] == rows(1, c));

  const PhraseEmbedding pair = emb.phrase_embedding(p, {0, 0, 2});
  for (int c = 0; c < 16; ++c) {
    CHECK(pair.pooled.data()[c] ==
          doctest::Approx(0.5f * (rows(0, c) + rows(1, c))).epsilon(1e-7));
  }

  TextPrompt bad;
  bad.tokens = {64};
  CHECK_THROWS_AS(emb.embed(bad), ParameterError);
}

TEST_CASE("conditioning channel arithmetic is paper-anchored") {
  Rng rng(3);
  const Tensor latent = rng.normal_tensor({4, 8, 6});
  const Tensor uv_aux = rng.normal_tensor({2, 8, 6});
  const Tensor gen = assemble_conditioning(RunMode::kGeneration, latent, uv_aux);
  CHECK(gen.dim(0) == 6);

  const Tensor tryon_aux = rng.normal_tensor({5, 8, 6});
  const Tensor tri = assemble_conditioning(RunMode::kTryon, latent, tryon_aux);
  CHECK(tri.dim(0) == 9);

  const Tensor zeros({2, 8, 6});
  const Tensor with_zeros = assemble_conditioning(RunMode::kGeneration, latent, zeros);
  for (int ch = 0; ch < 4; ++ch)
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 6; ++c) CHECK(with_zeros(ch, r, c) == latent(ch, r, c));

  CHECK_THROWS_AS(assemble_conditioning(RunMode::kGeneration, latent, tryon_aux), ModeError);
  CHECK_THROWS_AS(assemble_conditioning(RunMode::kTryon, latent, uv_aux), ModeError);
}

namespace {

ModelConfig tiny_model_config(RunMode mode = RunMode::kGeneration,
                              BindingMode binding = BindingMode::kBind123) {
  ModelConfig cfg;
  cfg.canvas_h = 16;
  cfg.canvas_w = 16;
  cfg.levels = 2;
  cfg.dims = {4, 4};
  cfg.text_dim = 4;
  cfg.time_dim = 4;
  cfg.mode = mode;
  cfg.binding = binding;
  cfg.init_seed = 11;
  return cfg;
}

DatasetConfig tiny_dataset_config(std::uint64_t seed = 17) {
  DatasetConfig d;
  d.count = 2;
  d.canvas_h = 32;
  d.canvas_w = 24;
  d.seed = seed;
  return d;
}

ModelConfig small_model_config(BindingMode binding = BindingMode::kBind123) {
  ModelConfig cfg;
  cfg.canvas_h = 32;
  cfg.canvas_w = 24;
  cfg.levels = 2;
  cfg.dims = {6, 8};
  cfg.text_dim = 8;
  cfg.time_dim = 8;
  cfg.binding = binding;
  cfg.init_seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("model construction asserts conv-in widths") {
  const CompositionModel gen(tiny_model_config(RunMode::kGeneration));
  CHECK(gen.params().at("den.conv_in.w").rows() == 6);
  const CompositionModel tryon(tiny_model_config(RunMode::kTryon));
  CHECK(tryon.params().at("den.conv_in.w").rows() == 9);
  const CompositionModel convin(tiny_model_config(RunMode::kGeneration, BindingMode::kConvInMask));
  CHECK(convin.params().at("ref.conv_in.w").rows() == 5);
  CHECK(gen.params().at("ref.conv_in.w").rows() == 4);

  // Feeding the wrong channel count fails loud.
  GraphParams p = GraphParams::wrap(gen.params(), false);
  Rng rng(4);
  CHECK_THROWS_AS(gen.denoiser_forward(p, rng.normal_tensor({9, 8, 8}), 1, Tensor({1, 4}), nullptr),
                  ModeError);
}

TEST_CASE("shared parameter names initialize identically across variants") {
  const CompositionModel none(tiny_model_config(RunMode::kGeneration, BindingMode::kNone));
  const CompositionModel bound(tiny_model_config(RunMode::kGeneration, BindingMode::kBind123));
  for (const auto& name : none.params().names) {
    CHECK(bit_equal(none.params().at(name), bound.params().at(name)));
  }
  // Binding MLPs exist only in binding variants, with zero final layers.
  CHECK(bound.params().has("bind.l1.w1"));
  CHECK_FALSE(none.params().has("bind.l1.w1"));
  const Tensor& w2 = bound.params().at("bind.l1.w2");
  for (float v : w2.raw()) CHECK(v == 0.0f);
  // bind1 puts the MLP at the smallest-resolution block only.
  const CompositionModel b1(tiny_model_config(RunMode::kGeneration, BindingMode::kBind1));
  CHECK_FALSE(b1.params().has("bind.l1.w1"));
  CHECK(b1.params().has("bind.l2.w1"));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto dir = std::filesystem::temp_directory_path() / "composer_ckpt_test";
  std::filesystem::remove_all(dir);
  const CompositionModel model(small_model_config());
  model.save_checkpoint(dir);
  const CompositionModel back = CompositionModel::load_checkpoint(dir);
  CHECK(back.config().dims == model.config().dims);
  for (const auto& name : model.params().names) {
    CHECK(bit_equal(back.params().at(name), model.params().at(name)));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("single-step inversion recovers z0") {
  const NoiseSchedule s = make_schedule(1, 0.05f, 0.05f);
  Rng rng(5);
  const Tensor z0 = rng.normal_tensor({4, 4, 4});
  const Tensor eps = rng.normal_tensor({4, 4, 4});
  const Tensor z1 = forward_diffuse(z0, 1, eps, s);
  const Tensor back = ancestral_step(z1, eps, 1, s, Tensor({4, 4, 4}));
  CHECK(max_abs_diff(back, z0) <= 1e-5f);
}

TEST_CASE("training_loss_with oracle cases") {
  const NoiseSchedule s = default_schedule(10);
  Rng rng(6);
  const Tensor z0 = rng.normal_tensor({4, 2, 2});
  const Tensor eps = rng.normal_tensor({4, 2, 2});
  const float perfect = training_loss_with(
      [&](const Tensor&, int) { return eps; }, z0, 5, eps, s);
  CHECK(perfect == 0.0f);

  const float offset = training_loss_with(
      [&](const Tensor& z_t, int) {
        Tensor out = eps;
        for (auto& v : out.raw()) v += 0.25f;
        (void)z_t;
        return out;
      },
      z0, 5, eps, s);
  CHECK(offset == doctest::Approx(0.0625).epsilon(1e-6));
}

TEST_CASE("sampling is deterministic and steps=0 decodes the initial noise") {
  const CompositionModel model(small_model_config());
  const TextEmbedder embedder(8, 3);
  const DatasetSample ds = make_sample(tiny_dataset_config(), 0);
  const PreparedSample ps = prepare_sample(model, embedder, ds);
  const NoiseSchedule s = default_schedule(6);

  const SampleResult a = sample(model, s, ps.ref, ps.aux, ps.text, 99, s.T);
  const SampleResult b = sample(model, s, ps.ref, ps.aux, ps.text, 99, s.T);
  CHECK(bit_equal(a.image, b.image));
  CHECK(bit_equal(a.latent, b.latent));

  // steps=0: decode of the seeded initial noise.
  const SampleResult zero = sample(model, s, ps.ref, ps.aux, ps.text, 42, 0);
  Rng expect = Rng(42).derive("sample").derive("init");
  const Tensor z = expect.normal_tensor({4, 16, 12});
  CHECK(bit_equal(zero.latent, z));
}

TEST_CASE("train steps=0 keeps parameters at init, same seed repeats losses") {
  const DatasetConfig dcfg = tiny_dataset_config();
  std::vector<DatasetSample> data;
  for (int i = 0; i < dcfg.count; ++i) data.push_back(make_sample(dcfg, i));
  const TextEmbedder embedder(8, 3);

  CompositionModel m0(small_model_config());
  const ParamStore init = m0.params();
  TrainConfig tcfg;
  tcfg.steps = 0;
  tcfg.T = 6;
  tcfg.seed = 1;
  train(m0, data, embedder, tcfg);
  for (const auto& name : init.names) CHECK(bit_equal(m0.params().at(name), init.at(name)));

  tcfg.steps = 5;
  CompositionModel m1(small_model_config());
  CompositionModel m2(small_model_config());
  const TrainResult r1 = train(m1, data, embedder, tcfg);
  const TrainResult r2 = train(m2, data, embedder, tcfg);
  CHECK(r1.losses == r2.losses);
  for (const auto& name : m1.params().names) {
    CHECK(bit_equal(m1.params().at(name), m2.params().at(name)));
  }
}

TEST_CASE("training reduces the loss on a single sample") {
  const DatasetConfig dcfg = tiny_dataset_config(23);
  std::vector<DatasetSample> data = {make_sample(dcfg, 0)};
  const TextEmbedder embedder(8, 3);
  CompositionModel model(small_model_config());
  TrainConfig tcfg;
  tcfg.steps = 120;
  tcfg.T = 6;
  tcfg.lr = 1e-2f;
  tcfg.seed = 7;
  const TrainResult result = train(model, data, embedder, tcfg);
  float head = 0.0f, tail = 0.0f;
  for (int i = 0; i < 20; ++i) {
    head += result.losses[static_cast<size_t>(i)];
    tail += result.losses[result.losses.size() - 20 + static_cast<size_t>(i)];
  }
  CHECK(tail < 0.5f * head);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const DatasetConfig dcfg = tiny_dataset_config();
  std::vector<DatasetSample> data = {make_sample(dcfg, 0)};
  const TextEmbedder embedder(8, 3);
  CompositionModel model(small_model_config());
  model.params().at("den.conv_out.w") = Tensor::full({6, 4}, 1e30f);
  TrainConfig tcfg;
  tcfg.steps = 3;
  tcfg.T = 6;
  CHECK_THROWS_AS(train(model, data, embedder, tcfg), NumericError);
  CHECK_THROWS_AS(train(model, {}, embedder, tcfg), ParameterError);
}

TEST_CASE("zero-init binding matches the unbound model bit-exactly") {
  const DatasetConfig dcfg = tiny_dataset_config(29);
  std::vector<DatasetSample> data = {make_sample(dcfg, 0), make_sample(dcfg, 1)};
  const TextEmbedder embedder(8, 3);

  CompositionModel none(small_model_config(BindingMode::kNone));
  CompositionModel bound(small_model_config(BindingMode::kBind123));
  TrainConfig tcfg;
  tcfg.steps = 1;
  tcfg.T = 6;
  tcfg.seed = 13;
  const TrainResult r_none = train(none, data, embedder, tcfg);
  const TrainResult r_bound = train(bound, data, embedder, tcfg);
  REQUIRE(r_none.losses.size() == 1);
  CHECK(r_none.losses[0] == r_bound.losses[0]);
}

TEST_CASE("run config json round trip is lossless") {
  RunConfig c;
  c.mode = RunMode::kAlbum;
  c.T = 37;
  c.steps = 12;
  c.seed = 1234567890123ull;
  c.binding = BindingMode::kConvInMask;
  c.consistency = ConsistencyMode::kAligned;
  c.data_dir = "some/data";
  c.out_dir = "out";
  c.checkpoint_dir = "ckpt";
  c.dims = {4, 8, 12};
  c.lr = 3e-3f;
  c.categories = {Category::kUpper, Category::kFace};
  c.frames = 5;
  const auto path = std::filesystem::temp_directory_path() / "composer_run_config.json";
  save_run_config(c, path);
  const RunConfig back = load_run_config(path);
  CHECK(back == c);
  std::filesystem::remove(path);
}

TEST_CASE("timestep embedding is deterministic and t-sensitive") {
  const Tensor a = timestep_embedding(3, 8);
  const Tensor b = timestep_embedding(3, 8);
  CHECK(bit_equal(a, b));
  const Tensor c = timestep_embedding(4, 8);
  CHECK(max_abs_diff(a, c) > 0.0f);
  // t = 0: sines vanish, cosines are 1.
  const Tensor zero = timestep_embedding(0, 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(zero(0, i) == 0.0f);
    CHECK(zero(0, 4 + i) == 1.0f);
  }
}

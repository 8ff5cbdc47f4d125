#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "composer/tensor.hpp"

namespace composer {

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// 64-bit FNV-1a, for deriving per-name parameter streams.
std::uint64_t fnv1a(const std::string& s);

/// Deterministic random stream. std::mt19937_64 is fully specified by the
/// standard; the uniform/normal transforms are hand-rolled here because the
/// std distributions are implementation-defined and would break
/// byte-reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix_seed(seed, 0x243f6a8885a308d3ull)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution computed in double then narrowed.
  float uniform() {
    return static_cast<float>(static_cast<double>(gen_() >> 11) * 0x1.0p-53);
  }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive. Modulo bias is negligible for the
  /// small ranges used here; determinism is what matters.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  /// Standard normal via Box-Muller.
  float normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586 * u2;
    spare_ = static_cast<float>(r * std::sin(theta));
    have_spare_ = true;
    return static_cast<float>(r * std::cos(theta));
  }

  Tensor normal_tensor(std::vector<int> shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.raw()) v = normal();
    return t;
  }

  Tensor uniform_tensor(std::vector<int> shape, float lo, float hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.raw()) v = uniform(lo, hi);
    return t;
  }

  /// Independent child stream keyed by salt; derivation does not advance or
  /// depend on this stream's position.
  Rng derive(std::uint64_t salt) const { return Rng(mix_seed(seed_, salt)); }
  Rng derive(const std::string& label) const { return derive(fnv1a(label)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace composer

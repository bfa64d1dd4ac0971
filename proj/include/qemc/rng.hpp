#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qemc {

/// Seedable generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// Distributions come from Boost.Random, whose implementations are shared
/// code rather than vendor-specific, so draws match across toolchains.
class Rng {
 public:
  static constexpr std::string_view kGeneratorName = "mt19937_64+boost.random";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, count).
  std::uint64_t index(std::uint64_t count);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Seed for the index-th member of an ensemble. Depends only on
/// (base, index), never on execution order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace qemc

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace jule {

/// Portable pseudo-random generator: xoshiro256** seeded through splitmix64.
///
/// Every draw (uniform, Gaussian, bounded index, shuffle) is implemented here
/// rather than through <random> distributions, whose outputs differ between
/// standard library vendors. Identical seeds give identical streams on every
/// platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next(); }
  std::uint64_t next() noexcept;

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  /// Standard normal draw (Box-Muller, polar-free form; the spare value is cached).
  double normal() noexcept;
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 step; also used to derive independent sub-seeds from a run seed.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Deterministic child seed for a named stream (e.g. stream 1 = net init, 2 = batches).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace jule

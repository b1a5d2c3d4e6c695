#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace krd {

// xoshiro256** seeded through splitmix64. The integer stream is fully
// specified by the published constants, so it is identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform integer on [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Independent child stream; does not advance this generator.
  Rng fork(std::uint64_t stream) const noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_ = 0;
  std::optional<double> spare_normal_;
};

// Fisher-Yates with Rng::uniform_index; std::shuffle is not portable.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.uniform_index(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace krd

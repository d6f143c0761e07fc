#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace autov {

// xoshiro256** seeded through splitmix64. Normal draws use Box-Muller with
// both outputs consumed in order, so sequences depend only on the seed and
// the call sequence.
//
// Child generators: split(stream) seeds a new generator from
// splitmix64(seed ^ splitmix64(stream + 1)), independent of how many draws the
// parent has made. Parallel work derives children by index so results do
// not depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on [0, bound), bound > 0, without modulo bias.
  std::uint64_t below(std::uint64_t bound);
  double normal();
  double normal(double mean, double stddev);

  Rng split(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace autov

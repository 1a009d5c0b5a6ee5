#ifndef FEDSIM_RANDOM_HPP_
#define FEDSIM_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace fedsim {

// Seeded pseudo-random stream owned by exactly one agent.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The std:: distributions are implementation-defined, so every
// transformation from raw bits to a variate is done here instead, which keeps
// runs byte-identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Independent child stream identified by a tag. The parent is not advanced,
  // so drawing from one child never shifts another.
  RandomStream child(std::string_view tag) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();
  // Uniform on the open interval (0, 1).
  double uniform_open01();
  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound);
  // Standard normal via the Marsaglia polar method.
  double standard_normal();

  void fill_bytes(std::span<std::uint8_t> out);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t value);

// In-place Fisher-Yates shuffle driven by a RandomStream.
template <typename T>
void shuffle(std::span<T> values, RandomStream& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace fedsim

#endif  // FEDSIM_RANDOM_HPP_

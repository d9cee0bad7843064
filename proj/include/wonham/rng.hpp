#pragma once

#include <cstdint>
#include <limits>

namespace wonham {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: the i-th output is a fixed mix of (key, i), so a
/// stream is fully described by its key. Models UniformRandomBitGenerator.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  explicit CounterEngine(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    return detail::splitmix64(key_ ^ detail::splitmix64(counter_++ * 0xD1B54A32D192ED03ULL));
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Per-trial random source. Signal and observation-noise draws come from
/// disjoint sub-streams, so the signal path does not depend on the grid.
class RngStream {
 public:
  enum class Substream : std::uint64_t { Signal = 1, Noise = 2, Auxiliary = 3 };

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
      : master_seed_(master_seed), stream_id_(stream_id) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  CounterEngine engine(Substream sub) const noexcept {
    std::uint64_t k = detail::splitmix64(master_seed_);
    k = detail::splitmix64(k ^ (stream_id_ * 0xA0761D6478BD642FULL));
    k = detail::splitmix64(k ^ (static_cast<std::uint64_t>(sub) * 0xE7037ED1A0B428DBULL));
    return CounterEngine(k);
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
};

}  // namespace wonham

#pragma once

#include <cstdint>

namespace ciedsim {

enum class StreamPurpose : std::uint64_t { scan = 1, net = 2, placement = 3 };

std::uint64_t mix64(std::uint64_t z) noexcept;

// Counter-based stream: draw i is a pure function of (key, i), where the key is
// derived from (seed, node, purpose). Streams never share state, so draws on
// one stream cannot perturb another.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t node, StreamPurpose purpose) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  // Standard normal via Box-Muller; consumes two draws.
  double normal() noexcept;
  bool bernoulli(double p) noexcept;
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline RngStream rng_stream(std::uint64_t seed, std::uint32_t node, StreamPurpose purpose) noexcept {
  return RngStream(seed, node, purpose);
}

}  // namespace ciedsim

#pragma once

#include <cstdint>

namespace quantlab::numerics {

// Stream ids used by the training pipeline so the data, weight-init, noise
// and evaluation draws never share generator state.
enum class Stream : std::uint64_t {
  kInit = 0,
  kRotation = 1,
  kData = 2,
  kNoise = 3,
  kEval = 4,
};

// Seedable xoshiro256++ generator. The (seed, stream) pair fully determines
// the sequence; distinct streams from one seed are decorrelated via a
// splitmix64 expansion of seed ^ f(stream).
class Prng {
 public:
  explicit Prng(std::uint64_t seed, std::uint64_t stream = 0);
  Prng(std::uint64_t seed, Stream stream) : Prng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double next_double();
  // Standard normal via Box-Muller; the paired variate is cached.
  double next_gaussian();

  Prng clone_with_stream(std::uint64_t stream) const { return Prng(seed_, stream); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace quantlab::numerics

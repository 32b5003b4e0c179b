#ifndef TWOPHASE_RNG_HPP_
#define TWOPHASE_RNG_HPP_

#include <cstdint>
#include <random>

namespace twophase {

// SplitMix64 finalizer. Used to derive independent engine seeds from a user
// seed and a stream id so that e.g. magnitudes and signs never share a stream.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  kMagnitudes = 1,
  kSigns = 2,
  kGaussian = 3,
};

// Deterministic 64-bit engine for (seed, stream). mt19937_64 output is fixed by
// the standard, and uniform01 below avoids the library-defined distributions,
// so sequences are identical across toolchains.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream)
      : engine_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)))) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace twophase

#endif  // TWOPHASE_RNG_HPP_

#ifndef WVA_RNG_HPP
#define WVA_RNG_HPP

#include <array>
#include <cstdint>

namespace wva {

// Name embedded in dataset metadata and tool output so results can be traced
// to the exact generation scheme.
inline constexpr const char* kGeneratorName = "xoshiro256ss/splitmix64-streams-v1";

// SplitMix64: used to expand a 64-bit seed into generator state and to derive
// independent stream seeds. Reference: Steele, Lea & Flood, "Fast splittable
// pseudorandom number generators".
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

// xoshiro256**: the workhorse generator (Blackman & Vigna, public domain).
struct Xoshiro256StarStar {
  std::array<std::uint64_t, 4> s;

  explicit Xoshiro256StarStar(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s) w = sm.next();
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }

  // Uniform double in [0, 1) using the top 53 bits; bit-reproducible on any
  // IEEE-754 platform, unlike the std distribution adapters.
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
};

// Stream derivation: master seed + (domain, index) -> independent seed.
// Domains keep replica streams and per-chunk trial streams from colliding.
enum class StreamDomain : std::uint64_t {
  trial_chunk = 0x7261772d6368756eULL,
  replica = 0x7265706c6963612dULL,
};

inline std::uint64_t derive_stream_seed(std::uint64_t master, StreamDomain domain,
                                        std::uint64_t index) {
  SplitMix64 sm(master ^ static_cast<std::uint64_t>(domain));
  std::uint64_t h = sm.next();
  sm.state = h + (index + 1) * 0x9e3779b97f4a7c15ULL;
  return sm.next();
}

}  // namespace wva

#endif  // WVA_RNG_HPP

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace llmcb {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Derives independent named generators from one master seed. Asking for the
/// same name twice yields identical streams, so adding a consumer (for example
/// counterfactual tracking) never shifts the draws seen by another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t master) : master_(master) {}

  std::uint64_t seed_for(std::string_view name) const { return mix_seed(master_, fnv1a64(name)); }
  Rng stream(std::string_view name) const { return Rng(seed_for(name)); }
  std::uint64_t master() const { return master_; }

 private:
  std::uint64_t master_;
};

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace llmcb

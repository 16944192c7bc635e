#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace ltm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a named substream. Every consumer of randomness derives its own
// stream from the user seed so results do not depend on evaluation order.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(tag)) + index);
}

namespace stream {
inline constexpr std::uint64_t kSample = 0x53414d50;
inline constexpr std::uint64_t kEmInit = 0x454d494e;
inline constexpr std::uint64_t kSearch = 0x53524348;
inline constexpr std::uint64_t kCic = 0x43494321;
}  // namespace stream

// mt19937_64 is fully specified by the standard, and the conversions below
// avoid the implementation-defined std distributions, so draws are portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1}.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  double exponential() { return -std::log1p(-uniform()); }

  // Draws from a discrete distribution given by (possibly unnormalized) weights.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    int last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last = static_cast<int>(i);
      if (u < weights[i]) return last;
      u -= weights[i];
    }
    return last;
  }

  // Symmetric Dirichlet(1) sample written into out.
  void dirichlet1(std::span<double> out) {
    double total = 0.0;
    for (double& v : out) {
      v = exponential() + 1e-12;
      total += v;
    }
    for (double& v : out) v /= total;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ltm

#pragma once

// Deterministic counter-based random streams.
//
// A stream is keyed by (seed, k1, k2, k3) and walks a splitmix64 sequence,
// so the sub-stream of any (voxel, subject) pair can be regenerated in
// isolation and results never depend on scheduling order or on which other
// voxels exist.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace prevmap {

// Domain tags keep independently keyed streams from colliding.
enum class StreamTag : std::uint64_t {
  ellipse_center = 1,
  ellipse_axes = 2,
  effect = 3,
  subject_split = 4,
  power_mc = 5,
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}
}  // namespace detail

class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed, std::uint64_t k1 = 0,
                    std::uint64_t k2 = 0, std::uint64_t k3 = 0) {
    state_ = detail::mix64(seed + 0x9e3779b97f4a7c15ull);
    state_ = detail::mix64(state_ ^ detail::mix64(k1 + 0xd1b54a32d192ed03ull));
    state_ = detail::mix64(state_ ^ detail::mix64(k2 + 0x8cb92ba72f3d8dd7ull));
    state_ = detail::mix64(state_ ^ detail::mix64(k3 + 0xa24baed4963ee407ull));
  }

  KeyedRng(std::uint64_t seed, StreamTag tag, std::uint64_t k2 = 0,
           std::uint64_t k3 = 0)
      : KeyedRng(seed, static_cast<std::uint64_t>(tag), k2, k3) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(state_);
  }

  // Uniform on (0,1); endpoints are unreachable.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second member of each pair is cached.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

  // Uniform integer in [0, n) by 128-bit multiply-shift.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Fisher-Yates shuffle driven by a keyed stream.
template <class T>
void keyed_shuffle(std::vector<T>& v, KeyedRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace prevmap

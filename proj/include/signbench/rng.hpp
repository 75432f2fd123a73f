#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>

namespace signbench {

// Stateless splitmix64 finalizer. Every random draw in the pipeline is a pure
// function of (key, counter), so parallel generation order can never change
// what any consumer sees.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix_key(std::uint64_t key, std::uint64_t data) noexcept {
  return mix64(key ^ mix64(data));
}

// FNV-1a, used for labeling streams and digesting byte ranges.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                                 std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Hierarchical addressing of one generated image. The design group is
// deliberately not part of the key: corruption draws must be identical
// across designs so corresponding images stay comparable.
struct RngKey {
  std::uint64_t master_seed = 0;
  std::uint32_t run = 0;
  std::uint16_t patch_id = 0;
  bool flipped = false;
  std::uint16_t class_id = 0;
  std::uint32_t replica = 0;

  constexpr std::uint64_t fold() const noexcept {
    std::uint64_t k = mix64(master_seed);
    k = mix_key(k, run);
    k = mix_key(k, patch_id);
    k = mix_key(k, flipped ? 1u : 0u);
    k = mix_key(k, class_id);
    k = mix_key(k, replica);
    return k;
  }
};

constexpr std::uint64_t derive_stream(std::uint64_t key, std::string_view label) noexcept {
  return mix_key(key, fnv1a(label));
}

// Counter-based generator: draw i is mix(key, i). Holds a cursor for
// convenience; cloning at a fixed counter replays the stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t at(std::uint64_t key, std::uint64_t counter) noexcept {
    return mix_key(key, counter);
  }

  std::uint64_t next_u64() noexcept { return at(key_, counter_++); }

  // [0, 1)
  double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * next_double();
  }

  // inclusive bounds
  int uniform_int(int lo, int hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Box-Muller; consumes two counters per pair.
  std::pair<double, double> gaussian_pair() noexcept {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double gaussian() noexcept { return gaussian_pair().first; }

  std::uint64_t counter() const noexcept { return counter_; }
  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace signbench

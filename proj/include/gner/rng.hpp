#pragma once

// Deterministic, platform-stable randomness for sampling and corruption.
// std::shuffle / std::uniform_int_distribution are not guaranteed to produce
// the same sequences across standard libraries, so everything here is
// hand-specified: FNV-1a for key derivation, splitmix64 in counter mode for
// the stream. Not cryptographic; used only to make runs reproducible.

#include <cstdint>
#include <string_view>
#include <vector>

namespace gner {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

// Accumulates heterogeneous key parts into a 64-bit value. Each part is
// terminated by a 0xff byte so ("ab","c") and ("a","bc") hash differently.
class KeyHasher {
 public:
  KeyHasher& add(std::string_view part) {
    for (unsigned char c : part) mix_byte(c);
    mix_byte(0xff);
    return *this;
  }

  KeyHasher& add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(v >> (8 * i)));
    mix_byte(0xff);
    return *this;
  }

  std::uint64_t digest() const { return state_; }

 private:
  void mix_byte(unsigned char c) {
    state_ ^= c;
    state_ *= kFnvPrime;
  }

  std::uint64_t state_ = kFnvOffset;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based generator: the n-th output depends only on (key, n), so a
// stream can be reproduced from its key regardless of platform.
class DetRng {
 public:
  explicit DetRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n); n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Fisher-Yates with this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// One uniform [0,1) draw fully determined by its key parts. Used for coupled
// per-mention corruption decisions that must agree across probability grids.
template <typename... Parts>
double keyed_uniform(Parts&&... parts) {
  KeyHasher h;
  (h.add(parts), ...);
  return static_cast<double>(splitmix64(h.digest()) >> 11) * 0x1.0p-53;
}

template <typename... Parts>
std::uint64_t derive_key(Parts&&... parts) {
  KeyHasher h;
  (h.add(parts), ...);
  return h.digest();
}

}  // namespace gner

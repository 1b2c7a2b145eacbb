#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hwgan/error.hpp"

namespace hwgan {

// xoshiro256++ with splitmix64 seeding. Self-contained so that sampling is
// reproducible bit-for-bit across runs and the full state (4 words) can be
// embedded in checkpoints.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : state_) {
      // splitmix64
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). n must be positive.
  uint64_t below(uint64_t n) {
    if (n == 0) throw InvalidArgumentError("Rng::below: n must be positive");
    return next_u64() % n;
  }

  // Two independent standard normals via Box-Muller. Consumes exactly two
  // uniform draws; no cached spare, so the state stays 4 words.
  std::pair<double, double> normal_pair() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double normal() { return normal_pair().first; }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

  // Hex encoding of the state, for checkpoint manifests.
  std::string serialize() const;
  static Rng deserialize(const std::string& hex);

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> state_{};
};

inline std::string Rng::serialize() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (uint64_t w : state_)
    for (int i = 60; i >= 0; i -= 4) out.push_back(digits[(w >> i) & 0xf]);
  return out;
}

inline Rng Rng::deserialize(const std::string& hex) {
  if (hex.size() != 64) throw ParseError("Rng state must be 64 hex digits");
  std::array<uint64_t, 4> s{};
  for (int w = 0; w < 4; ++w) {
    uint64_t v = 0;
    for (int i = 0; i < 16; ++i) {
      const char c = hex[static_cast<size_t>(w * 16 + i)];
      uint64_t d = 0;
      if (c >= '0' && c <= '9') d = static_cast<uint64_t>(c - '0');
      else if (c >= 'a' && c <= 'f') d = static_cast<uint64_t>(c - 'a' + 10);
      else throw ParseError("Rng state contains a non-hex digit");
      v = (v << 4) | d;
    }
    s[static_cast<size_t>(w)] = v;
  }
  Rng rng;
  rng.set_state(s);
  return rng;
}

}  // namespace hwgan

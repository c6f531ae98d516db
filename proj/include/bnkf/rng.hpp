#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bnkf::rng {

// All randomness in the toolkit flows from one master seed. Sub-seeds are
// derived by hashing the master seed together with a textual role label
// ("traj/17", "noise/high/17", ...), so they are stable under config
// reordering and safe to draw in parallel.
//
// Derivation: FNV-1a over the label bytes, seeded with the master, then a
// splitmix64 finalizer to decorrelate nearby labels.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role) {
  std::uint64_t h = 14695981039346656037ull ^ splitmix64(master);
  for (unsigned char c : role) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role,
                                 std::uint64_t index) {
  return derive_seed(master, std::string(role) + "/" + std::to_string(index));
}

// xoshiro256++: the bit source for the normal streams. Chosen over the
// standard engines for draw throughput; the network forward pass consumes
// one draw per weight, which makes the generator the inner loop.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) {
      sm = splitmix64(sm);
      word = sm;
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on (0,1), both endpoints excluded.
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Seeded stream of N(0,1) draws: xoshiro bits mapped through the inverse
// normal CDF (see kernels::normal_from_bits). The bit-to-normal map is
// identical on the scalar and AVX2 paths, so a seed fixes the stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : eng_(seed) {}

  void fill(double* out, std::size_t n);

  double operator()() {
    double v;
    fill(&v, 1);
    return v;
  }

 private:
  Xoshiro256pp eng_;
  std::vector<std::uint64_t> bits_;
};

}  // namespace bnkf::rng

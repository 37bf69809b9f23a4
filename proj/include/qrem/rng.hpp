#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so any element of an instance can be regenerated
// independently of the others and of the order of generation.

#include <array>
#include <cmath>
#include <cstdint>

#include <boost/math/special_functions/erf.hpp>

namespace qrem {

// Bumped whenever the mapping from (seed, n, index) to energies changes.
inline constexpr std::uint32_t kRngVersion = 1;

// Stream tags keep unrelated consumers of one seed apart.
enum class Stream : std::uint32_t {
  kEnergies = 0,
  kStartVector = 1,
  kSampleSeed = 2,
};

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit constexpr Philox4x32(Key key) : key_(key) {}
  explicit constexpr Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Block operator()(Block ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Block single_round(const Block& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
};

// 64 random bits for element `index` of stream `stream` at size `n`.
inline std::uint64_t random_bits(std::uint64_t seed, Stream stream, std::uint32_t n,
                                 std::uint64_t index) {
  const Philox4x32 gen(seed);
  const std::uint32_t tag = (kRngVersion << 16) | static_cast<std::uint32_t>(stream);
  const auto out = gen({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                        n, tag});
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

// Maps 64 bits to the open interval (0, 1): midpoints of a 2^-52 lattice,
// all exactly representable, so neither end is ever reached.
inline double bits_to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// Standard normal quantile.
inline double normal_quantile(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

inline double standard_normal(std::uint64_t seed, Stream stream, std::uint32_t n,
                              std::uint64_t index) {
  return normal_quantile(bits_to_open_unit(random_bits(seed, stream, n, index)));
}

// Seed of sample `sample` in an ensemble of size-n instances.
inline std::uint64_t derive_sample_seed(std::uint64_t master_seed, int n, std::uint64_t sample) {
  return random_bits(master_seed, Stream::kSampleSeed, static_cast<std::uint32_t>(n), sample);
}

}  // namespace qrem

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace driftlab {

/// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
///
/// A block is a pure function of (key, counter), so independent streams are
/// addressed by counter coordinates instead of shared mutable state.  Stream
/// layout used by the simulator: counter = {path_lo, path_hi, block_index, 0},
/// key = the 64-bit master seed.
struct Philox4x32 {
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::uint64_t key,
                                            std::array<std::uint32_t, 4> ctr) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
      k0 += kW0;
      k1 += kW1;
    }
    return ctr;
  }
};

/// Deterministic per-stream normal generator.  Each Philox block yields four
/// uniforms, turned into four N(0,1) draws by Box-Muller.  The block index is
/// a consumption counter, so a stream is fully determined by (seed, stream_id)
/// and the number of draws taken.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), id_(stream_id) {}

  double next() {
    if (cache_size_ == 0) refill();
    return cache_[--cache_size_];
  }

  /// Uniform in (0,1), consuming one cached normal slot's worth of state.
  double next_uniform() {
    const auto b = Philox4x32::block(
        seed_, {static_cast<std::uint32_t>(id_),
                static_cast<std::uint32_t>(id_ >> 32), block_++, 0x75313375u});
    return to_unit(b[0]);
  }

  std::uint64_t blocks_consumed() const { return block_; }

 private:
  static double to_unit(std::uint32_t x) {
    return (static_cast<double>(x) + 0.5) * (1.0 / 4294967296.0);
  }

  void refill() {
    const auto b = Philox4x32::block(
        seed_, {static_cast<std::uint32_t>(id_),
                static_cast<std::uint32_t>(id_ >> 32), block_++, 0u});
    const double u0 = to_unit(b[0]);
    const double u1 = to_unit(b[1]);
    const double u2 = to_unit(b[2]);
    const double u3 = to_unit(b[3]);
    const double r0 = std::sqrt(-2.0 * std::log(u0));
    const double r1 = std::sqrt(-2.0 * std::log(u2));
    const double a0 = 2.0 * M_PI * u1;
    const double a1 = 2.0 * M_PI * u3;
    cache_[0] = r1 * std::sin(a1);
    cache_[1] = r1 * std::cos(a1);
    cache_[2] = r0 * std::sin(a0);
    cache_[3] = r0 * std::cos(a0);
    cache_size_ = 4;
  }

  std::uint64_t seed_;
  std::uint64_t id_;
  std::uint32_t block_ = 0;
  std::array<double, 4> cache_{};
  int cache_size_ = 0;
};

}  // namespace driftlab

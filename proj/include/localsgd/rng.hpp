#pragma once

#include <array>
#include <cstdint>

namespace localsgd {

/// Address of a single random draw. Every draw in the lab is a pure function
/// of this tuple, so trajectories never depend on scheduling or on how many
/// draws other replicas consumed.
struct RngKey {
  std::uint64_t master_seed = 0;
  std::uint64_t experiment_id = 0;
  std::uint32_t replica = 0;
  std::uint32_t client = 0;
  std::uint32_t round = 0;
  std::uint32_t step = 0;

  RngKey with_experiment(std::uint64_t id) const {
    RngKey k = *this;
    k.experiment_id = id;
    return k;
  }
  RngKey with_replica(std::uint32_t r) const {
    RngKey k = *this;
    k.replica = r;
    return k;
  }
  RngKey with_client(std::uint32_t c) const {
    RngKey k = *this;
    k.client = c;
    return k;
  }
  RngKey with_round(std::uint32_t r) const {
    RngKey k = *this;
    k.round = r;
    return k;
  }
  RngKey with_step(std::uint32_t s) const {
    RngKey k = *this;
    k.step = s;
    return k;
  }

  friend bool operator==(const RngKey&, const RngKey&) = default;
};

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Folds (master_seed, experiment_id) into a 64-bit Philox key.
std::array<std::uint32_t, 2> stream_key(std::uint64_t master_seed,
                                        std::uint64_t experiment_id) noexcept;

/// Raw 64 random bits for a key.
std::uint64_t random_bits(const RngKey& key) noexcept;

/// Uniform draw strictly inside (0, 1), 53-bit resolution.
double uniform_open(const RngKey& key) noexcept;

/// Standard normal draw by inverse CDF of uniform_open(key).
double standard_normal(const RngKey& key) noexcept;

/// Inverse of the standard normal CDF, Wichura's AS241 (PPND16).
/// Relative accuracy about 1e-16 on (0, 1).
double inverse_normal_cdf(double p) noexcept;

/// Caches the Philox key for a fixed (master_seed, experiment_id) so inner
/// loops only pay for the block function.
class KeyedStream {
 public:
  explicit KeyedStream(const RngKey& base) noexcept
      : key_(stream_key(base.master_seed, base.experiment_id)), base_(base) {}

  std::uint64_t bits(std::uint32_t replica, std::uint32_t client, std::uint32_t round,
                     std::uint32_t step) const noexcept {
    const auto out = philox4x32({step, round, client, replica}, key_);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  }

  double uniform(std::uint32_t replica, std::uint32_t client, std::uint32_t round,
                 std::uint32_t step) const noexcept {
    return (static_cast<double>(bits(replica, client, round, step) >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint32_t replica, std::uint32_t client, std::uint32_t round,
                std::uint32_t step) const noexcept {
    return inverse_normal_cdf(uniform(replica, client, round, step));
  }

  const RngKey& base() const noexcept { return base_; }

 private:
  std::array<std::uint32_t, 2> key_;
  RngKey base_;
};

}  // namespace localsgd

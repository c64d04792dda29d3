#pragma once

#include <array>
#include <cstdint>

namespace ctrl_duality {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
/// every output block is a pure function of (key, counter).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Block operator()(Block counter) const;

 private:
  std::array<std::uint32_t, 2> key_;
};

/// SplitMix64 finalizer, used to derive independent sub-seeds from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

/// Uniform in the open interval (0, 1) from the top 52 bits.
double uniform_from_bits(std::uint32_t hi, std::uint32_t lo);

/// Standard normal quantile.
double inverse_normal_cdf(double u);

/// Keyed random stream: draw k of stream (seed, path) is reproducible and
/// independent of the order in which draws are requested.
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path) : gen_(seed), path_(path) {}

  double uniform(std::uint64_t index) const;
  double normal(std::uint64_t index) const;

 private:
  Philox4x32 gen_;
  std::uint64_t path_;
};

}  // namespace ctrl_duality

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace prefmatch {

using Rng = std::mt19937_64;

/// One master seed split into independent named streams, so each consumer
/// (init, sampling, dropout, negatives, splits) can be replayed alone.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  Rng stream(std::string_view name) const;

 private:
  std::uint64_t seed_;
};

/// FNV-1a, used to turn stream names into seed material.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline Rng RngStreams::stream(std::string_view name) const {
  const std::uint64_t tag = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

}  // namespace prefmatch

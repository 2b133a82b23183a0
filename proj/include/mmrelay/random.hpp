#pragma once

#include <cstdint>
#include <random>

namespace mmrelay {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, trial, purpose). Streams depend only
/// on the triple, never on execution order.
inline Rng stream_rng(std::uint64_t master, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

/// Uniform on [0, 1), 53 random bits.
inline double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace mmrelay

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>

namespace fcnet {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed that depends only on (parent, stream, index), never on call order.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(parent ^ mix64(stream)) + index);
}

/// 64-bit FNV-1a over a byte string.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are
/// rethrown on the calling thread (the one with the lowest index wins).
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fcnet

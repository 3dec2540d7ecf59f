#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace trialref {

using Rng = std::mt19937_64;

// Named substreams of a root seed. Identical (root, name) pairs always give the
// same child seed; distinct names give statistically unrelated streams.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

inline Rng make_rng(std::uint64_t root, std::string_view name) {
  return Rng(derive_seed(root, name));
}

}  // namespace trialref

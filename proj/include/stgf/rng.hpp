#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stgf {

inline constexpr std::uint64_t kDefaultSeed = 20210611;

/// Independent generator for a named consumer of a master seed, so changing
/// how much one stage draws never shifts another stage's stream.
std::mt19937_64 rng_stream(std::uint64_t seed, std::string_view name);

}  // namespace stgf

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fmaml {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of an independent stream: mix64 chain over (master, FNV-1a(purpose), index).
/// Stream i of a purpose never depends on how many other streams exist.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0);

}  // namespace fmaml

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tbs {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// 64-bit FNV-1a. Stable across platforms; used for config hashes and seeds.
std::uint64_t fnv1a64(std::string_view data);

// Seed for the `index`-th stochastic unit of a named stage.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                          std::uint64_t index = 0);

// Uniform integer in [0, n).
int uniform_int(Rng& rng, int n);
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

}  // namespace tbs

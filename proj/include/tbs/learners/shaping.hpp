#pragma once

#include <array>
#include <span>
#include <vector>

#include "json.hpp"
#include "tbs/core/random.hpp"
#include "tbs/envs/concepts.hpp"
#include "tbs/envs/environment.hpp"

namespace tbs::learners {

// Per-agent random reward bonus on game events.
struct ShapingSpec {
  std::vector<double> coefficients;
  std::vector<double> base_magnitudes;
  // Steps over which the bonus decays linearly to zero; 0 keeps it constant.
  long anneal_horizon = 0;

  double multiplier(long step) const;
  // Bonus for the events an agent triggered on one step.
  double reward(const envs::EventVector& events, long step) const;
  bool operator==(const ShapingSpec&) const = default;
};

// coefficients[e] = base[e] * z_e with z_e ~ N(0, 1), drawn in event order.
ShapingSpec sample_shaping(std::span<const double> base_magnitudes, Rng& rng,
                           long anneal_horizon = 0);

// Kitchen: place onion 0.15, pickup plate 0.5, pickup soup 0.5, counter
// pickup 0.15, counter drop 0.15, deliver 0.5.
std::vector<double> kitchen_base_magnitudes();
// Signaling: 0.05 on every (number, action) event.
std::vector<double> signaling_base_magnitudes();
std::vector<double> base_magnitudes(envs::EnvKind kind);

// A signaling codebook maps number h (index h-1) to a letter 0..3.
using Codebook = std::array<int, envs::kSignalingNumbers>;

// `count` distinct codebooks chosen greedily for large pairwise Hamming
// distance, starting from the identity. Deterministic.
std::vector<Codebook> convention_families(int count);

// Alice shaping that plants a codebook: +bonus on (h, codebook[h]) events.
ShapingSpec planted_codebook_shaping(const Codebook& codebook, double bonus);

void to_json(nlohmann::json& j, const ShapingSpec& s);
void from_json(const nlohmann::json& j, ShapingSpec& s);

}  // namespace tbs::learners

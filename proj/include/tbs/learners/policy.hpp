#pragma once

#include <array>
#include <memory>
#include <string>

#include "json.hpp"
#include "tbs/core/random.hpp"
#include "tbs/envs/environment.hpp"
#include "tbs/learners/shaping.hpp"
#include "tbs/learners/value_function.hpp"

namespace tbs::learners {

struct PolicyProvenance {
  std::string role;  // "selfplay", "best_response", ...
  std::uint64_t seed = 0;
  std::vector<double> shaping_coefficients;
  std::string config_hash;
};

// Greedy decision rule over an immutable value function. Observations the
// value function never saw get a uniformly random action.
class Policy {
 public:
  Policy() = default;
  Policy(ValueFunction values, PolicyProvenance provenance = {});

  // Untrained policy: acts uniformly at random everywhere.
  static Policy uniform(int action_count, const envs::ObservationSpec& spec);

  int act(const envs::Observation& obs, Rng& rng) const;
  // Greedy action, lowest index on ties (0 for unseen observations).
  int greedy_action(const envs::Observation& obs) const;
  bool knows(const envs::Observation& obs) const;

  int action_count() const { return values_->action_count(); }
  const ValueFunction& values() const { return *values_; }
  const PolicyProvenance& provenance() const { return provenance_; }
  bool same_values(const Policy& other) const {
    return values_ == other.values_ || *values_ == *other.values_;
  }

  nlohmann::json to_json() const;
  static Policy from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Policy load(const std::string& path);

 private:
  std::shared_ptr<const ValueFunction> values_;
  PolicyProvenance provenance_;
};

struct PairProvenance {
  std::uint64_t seed = 0;
  std::array<ShapingSpec, 2> shaping;
  int family = -1;  // planted convention family, -1 when none
};

// Two co-trained policies and their measured self-play return.
struct PolicyPair {
  std::array<Policy, 2> seats;
  double selfplay_return = 0.0;
  PairProvenance provenance;

  const Policy& seat(int agent) const { return seats[agent]; }
};

inline constexpr int kPolicyFormatVersion = 1;

}  // namespace tbs::learners

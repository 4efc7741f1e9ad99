#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tbs/envs/concepts.hpp"

namespace tbs::envs {

// Agents are indexed 0 (seat 1) and 1 (seat 2) throughout the library.
inline constexpr int kNumAgents = 2;

using Observation = std::vector<int>;
using JointAction = std::array<int, kNumAgents>;
// Binary indicator vector over the active concept set.
using InteractionVector = std::vector<std::uint8_t>;
// Binary indicator vector over the environment's shaping events.
using EventVector = std::vector<std::uint8_t>;

struct ObservationSpec {
  std::vector<std::string> names;
  // Component i takes values in [0, cardinalities[i]).
  std::vector<int> cardinalities;
  // Components that make up a tabular policy key.
  std::vector<bool> key_mask;
  // Component holding the partner's last observable interaction event as
  // (granular event index + 1), 0 when nothing was observed this step.
  int partner_event_component = -1;

  std::size_t size() const { return cardinalities.size(); }
};

struct StepOutcome {
  double reward = 0.0;  // sparse team reward
  std::array<InteractionVector, kNumAgents> interactions;
  std::array<EventVector, kNumAgents> game_events;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual void reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(const JointAction& actions) = 0;
  virtual Observation observe(int agent) const = 0;

  virtual int num_actions(int agent) const = 0;
  // False when the agent's action is ignored this step (turn-based games).
  virtual bool is_acting(int agent) const = 0;
  virtual int timestep() const = 0;
  virtual int horizon() const = 0;
  virtual bool done() const = 0;

  virtual const ConceptSet& concepts() const = 0;
  virtual const ObservationSpec& observation_spec() const = 0;

  virtual int num_game_events() const = 0;
  virtual const std::vector<std::string>& game_event_names() const = 0;
  // Weights of the environment's built-in annealed shaping, per game event.
  virtual std::vector<double> default_shaping() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace tbs::envs

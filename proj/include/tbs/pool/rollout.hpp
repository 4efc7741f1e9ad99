#pragma once

#include <array>
#include <vector>

#include "tbs/core/random.hpp"
#include "tbs/envs/env_spec.hpp"
#include "tbs/learners/policy.hpp"

namespace tbs::pool {

// Anything that can occupy a seat for an episode.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual void begin_episode(std::uint64_t seed) { (void)seed; }
  // Called once per timestep, including steps where the seat is not acting.
  virtual int act(const envs::Observation& obs, int timestep, Rng& rng) = 0;
};

// Plays a fixed policy, optionally with epsilon exploration noise.
class PolicyActor final : public Actor {
 public:
  explicit PolicyActor(const learners::Policy& policy, double epsilon = 0.0)
      : policy_(&policy), epsilon_(epsilon) {}
  int act(const envs::Observation& obs, int timestep, Rng& rng) override;

 private:
  const learners::Policy* policy_;
  double epsilon_;
};

struct Transition {
  std::array<envs::Observation, 2> observations;
  envs::JointAction actions{};
  std::array<bool, 2> acting{};
  double reward = 0.0;
  std::array<envs::InteractionVector, 2> interactions;
  std::array<envs::EventVector, 2> game_events;
};

struct Trajectory {
  std::vector<Transition> steps;
  double sparse_return = 0.0;
};

struct RolloutResult {
  double mean_return = 0.0;
  std::vector<double> returns;            // per episode, sparse reward only
  std::vector<Trajectory> trajectories;   // filled when recording
};

// Seed for episode e of a rollout with the given base seed.
std::uint64_t episode_seed(std::uint64_t seed, int episode);

RolloutResult rollout(Actor& seat1, Actor& seat2, const envs::EnvSpec& env,
                      int episodes, std::uint64_t seed, bool record_events);

// Greedy execution of two policies.
RolloutResult rollout(const learners::Policy& seat1,
                      const learners::Policy& seat2, const envs::EnvSpec& env,
                      int episodes, std::uint64_t seed, bool record_events);

}  // namespace tbs::pool

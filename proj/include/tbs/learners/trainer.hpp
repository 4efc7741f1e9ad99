#pragma once

#include <array>
#include <span>

#include "json.hpp"
#include "tbs/envs/env_spec.hpp"
#include "tbs/learners/policy.hpp"
#include "tbs/learners/shaping.hpp"

namespace tbs::learners {

struct TrainConfig {
  double gamma = 0.99;
  double lambda = 0.5;
  // Epsilon decays linearly from epsilon_start to epsilon_floor over this
  // fraction of total_steps.
  double epsilon_anneal_fraction = 0.2;
  double epsilon_start = 1.0;
  double epsilon_floor = 0.05;
  double learning_rate = 0.1;
  bool lr_decay = true;  // linear decay to zero over total_steps
  long total_steps = 200000;
  // Transitions per lambda-target segment.
  int segment_length = 16;
  // The environment's built-in shaping decays to zero over this fraction.
  double shaping_horizon_fraction = 0.8;
  Representation representation = Representation::kTabular;
  std::uint64_t seed = 0;
  // Greedy episodes used to measure the self-play return after training.
  int eval_episodes = 20;

  // Library defaults adjusted per environment: signaling runs keep a higher
  // exploration floor so unused messages stay decodable.
  static TrainConfig defaults_for(envs::EnvKind kind);

  double epsilon(long step) const;
  double learning_rate_at(long step) const;
  double default_shaping_multiplier(long step) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Joint self-play with value decomposition: Q_joint = Q_1 + Q_2, both
// trained on the lambda-return of the shared training reward (sparse +
// annealed built-in shaping + each agent's random shaping).
// Throws DivergenceError on non-finite values.
PolicyPair train_selfplay_pair(const envs::EnvSpec& env,
                               const std::array<ShapingSpec, 2>& shaping,
                               const TrainConfig& config);

// Single-agent Q(lambda) for `seat` (0 or 1) against frozen partners. A
// partner pair is drawn uniformly at each episode start and plays its other
// seat greedily.
Policy train_best_response(const envs::EnvSpec& env,
                           std::span<const PolicyPair> partners, int seat,
                           const TrainConfig& config);

}  // namespace tbs::learners

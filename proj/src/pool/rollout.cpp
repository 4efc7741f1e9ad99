#include "tbs/pool/rollout.hpp"

#include "tbs/core/errors.hpp"

namespace tbs::pool {

int PolicyActor::act(const envs::Observation& obs, int, Rng& rng) {
  if (epsilon_ > 0.0 && uniform01(rng) < epsilon_) {
    return uniform_int(rng, policy_->action_count());
  }
  return policy_->act(obs, rng);
}

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, "episode", static_cast<std::uint64_t>(episode));
}

RolloutResult rollout(Actor& seat1, Actor& seat2, const envs::EnvSpec& spec,
                      int episodes, std::uint64_t seed, bool record_events) {
  if (episodes < 1) throw Error("rollout needs at least one episode");
  auto env = envs::make_env(spec);
  std::array<Actor*, 2> actors{&seat1, &seat2};
  RolloutResult result;
  result.returns.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t es = episode_seed(seed, e);
    env->reset(es);
    Rng rng(derive_seed(es, "actors"));
    seat1.begin_episode(derive_seed(es, "seat", 0));
    seat2.begin_episode(derive_seed(es, "seat", 1));
    Trajectory traj;
    while (!env->done()) {
      Transition tr;
      const int t = env->timestep();
      for (int i = 0; i < 2; ++i) {
        tr.observations[i] = env->observe(i);
        tr.acting[i] = env->is_acting(i);
      }
      for (int i = 0; i < 2; ++i) {
        tr.actions[i] = actors[i]->act(tr.observations[i], t, rng);
      }
      envs::StepOutcome out = env->step(tr.actions);
      traj.sparse_return += out.reward;
      if (record_events) {
        tr.reward = out.reward;
        tr.interactions = std::move(out.interactions);
        tr.game_events = std::move(out.game_events);
        traj.steps.push_back(std::move(tr));
      }
    }
    result.returns.push_back(traj.sparse_return);
    result.mean_return += traj.sparse_return;
    if (record_events) result.trajectories.push_back(std::move(traj));
  }
  result.mean_return /= episodes;
  return result;
}

RolloutResult rollout(const learners::Policy& seat1,
                      const learners::Policy& seat2, const envs::EnvSpec& env,
                      int episodes, std::uint64_t seed, bool record_events) {
  PolicyActor a(seat1);
  PolicyActor b(seat2);
  return rollout(a, b, env, episodes, seed, record_events);
}

}  // namespace tbs::pool

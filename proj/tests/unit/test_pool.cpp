#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/envs/kitchen.hpp"
#include "tbs/pool/pool.hpp"
#include "tbs/pool/rollout.hpp"

using namespace tbs;
using namespace tbs::pool;

namespace {

learners::TrainConfig signaling_config() {
  return learners::TrainConfig::defaults_for(envs::EnvKind::kSignaling);
}

bool same_trajectory(const Trajectory& a, const Trajectory& b) {
  if (a.steps.size() != b.steps.size() || a.sparse_return != b.sparse_return) return false;
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    const auto& x = a.steps[t];
    const auto& y = b.steps[t];
    if (x.observations != y.observations || x.actions != y.actions ||
        x.interactions != y.interactions || x.game_events != y.game_events ||
        x.reward != y.reward || x.acting != y.acting) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("pools hold n pairs with distinct shaping and seeds") {
  const auto pool = build_pool(envs::EnvSpec{}, 10, signaling_config(), 42, {.workers = 4});
  REQUIRE(pool.size() == 10);
  std::set<std::vector<double>> shapings;
  std::set<std::uint64_t> seeds;
  for (const auto& p : pool.pairs) {
    shapings.insert(p.provenance.shaping[0].coefficients);
    seeds.insert(p.provenance.seed);
    CHECK(p.seat(0).provenance().role == "selfplay");
    CHECK(p.provenance.family == -1);
  }
  CHECK(shapings.size() == 10);
  CHECK(seeds.size() == 10);
}

TEST_CASE("pool building is reproducible and worker-count independent") {
  const auto a = build_pool(envs::EnvSpec{}, 3, signaling_config(), 7, {.workers = 1});
  const auto b = build_pool(envs::EnvSpec{}, 3, signaling_config(), 7, {.workers = 3});
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i].seat(0).same_values(b[i].seat(0)));
    CHECK(a[i].seat(1).same_values(b[i].seat(1)));
    CHECK(a[i].provenance.shaping == b[i].provenance.shaping);
    CHECK(a[i].selfplay_return == b[i].selfplay_return);
  }
  const auto c = build_pool(envs::EnvSpec{}, 3, signaling_config(), 8, {.workers = 3});
  CHECK(c.seeds() != a.seeds());
}

TEST_CASE("held-out and training pools share no seeds") {
  auto cfg = signaling_config();
  cfg.total_steps = 1000;
  const auto train = build_pool(envs::EnvSpec{}, 5, cfg, 3);
  const auto held = build_heldout_pool(envs::EnvSpec{}, 5, cfg, 3);
  for (auto s : held.seeds()) {
    for (auto t : train.seeds()) CHECK(s != t);
  }
}

TEST_CASE("planted families rotate through codebooks") {
  auto cfg = signaling_config();
  cfg.total_steps = 1000;
  const auto pool = build_pool(envs::EnvSpec{}, 5, cfg, 3, {.planted_families = 2});
  for (int i = 0; i < 5; ++i) CHECK(pool[i].provenance.family == i % 2);
  CHECK(pool[0].provenance.shaping[0] == pool[2].provenance.shaping[0]);
  CHECK_FALSE(pool[0].provenance.shaping[0] == pool[1].provenance.shaping[0]);
  envs::EnvSpec kitchen{envs::EnvKind::kKitchen};
  CHECK_THROWS_AS(build_pool(kitchen, 2, cfg, 3, {.planted_families = 2}), ConfigError);
}

TEST_CASE("a single pair is a valid pool") {
  auto cfg = signaling_config();
  cfg.total_steps = 1000;
  CHECK(build_pool(envs::EnvSpec{}, 1, cfg, 0).size() == 1);
  CHECK_THROWS_AS(build_pool(envs::EnvSpec{}, 0, cfg, 0), ConfigError);
}

TEST_CASE("divergent training is retried and then reported") {
  auto cfg = signaling_config();
  cfg.total_steps = 5000;
  cfg.learning_rate = 1e308;
  cfg.lr_decay = false;
  CHECK_THROWS_AS(build_pool(envs::EnvSpec{}, 1, cfg, 0, {.max_retries = 3}), DivergenceError);
}

TEST_CASE("oracle rollouts recover the recorded self-play return") {
  const auto pool = build_pool(envs::EnvSpec{}, 2, signaling_config(), 11, {.workers = 2});
  for (const auto& p : pool.pairs) {
    const auto r = rollout(p.seat(0), p.seat(1), pool.env, 200, 99, false);
    double var = 0.0;
    for (double x : r.returns) var += (x - r.mean_return) * (x - r.mean_return);
    const double se = std::sqrt(var / (r.returns.size() - 1) / r.returns.size());
    // The recorded value is itself a 20-episode mean.
    CHECK(std::abs(r.mean_return - p.selfplay_return) <= 4 * se * std::sqrt(10.0) + 1e-9);
  }
}

TEST_CASE("random policies on the kitchen score nothing") {
  envs::EnvSpec spec{envs::EnvKind::kKitchen};
  auto env = envs::make_env(spec);
  const auto uniform = learners::Policy::uniform(6, env->observation_spec());
  const auto r = rollout(uniform, uniform, spec, 50, 1, false);
  CHECK(r.returns.size() == 50);
  // Near zero relative to a competent single cook.
  envs::Kitchen k(std::make_shared<const envs::Layout>(envs::Layout::builtin("cramped_room")));
  double scripted = 0.0;
  while (!k.done()) scripted += k.step({testing::scripted_chef(k.state(), 0), envs::kStay}).reward;
  CHECK(scripted >= 100.0);
  CHECK(r.mean_return < 0.05 * scripted);
}

TEST_CASE("rollouts are deterministic and greedy") {
  const auto pool = build_pool(envs::EnvSpec{}, 1, signaling_config(), 5);
  const auto a = rollout(pool[0].seat(0), pool[0].seat(1), pool.env, 3, 17, true);
  const auto b = rollout(pool[0].seat(0), pool[0].seat(1), pool.env, 3, 17, true);
  REQUIRE(a.trajectories.size() == 3);
  for (int e = 0; e < 3; ++e) CHECK(same_trajectory(a.trajectories[e], b.trajectories[e]));
  for (const auto& traj : a.trajectories) {
    CHECK(traj.steps.size() == 48);
    for (const auto& step : traj.steps) {
      for (int i = 0; i < 2; ++i) {
        if (pool[0].seat(i).knows(step.observations[i])) {
          CHECK(step.actions[i] == pool[0].seat(i).greedy_action(step.observations[i]));
        }
      }
    }
  }
  CHECK(rollout(pool[0].seat(0), pool[0].seat(1), pool.env, 3, 17, false).trajectories.empty());
  CHECK_THROWS(rollout(pool[0].seat(0), pool[0].seat(1), pool.env, 0, 17, false));
}

TEST_CASE("pools persist with a manifest") {
  const auto pool = build_pool(envs::EnvSpec{}, 2, signaling_config(), 3, {.planted_families = 2});
  const auto dir = std::filesystem::temp_directory_path() / "tbs_pool_test";
  std::filesystem::remove_all(dir);
  save_pool(pool, dir.string(), "abc123");
  const auto manifest = read_json((dir / "manifest.json").string());
  CHECK(manifest.at("config_hash") == "abc123");
  CHECK(manifest.at("pairs").size() == 2);
  CHECK(manifest.at("pairs")[1].at("family") == 1);
  const auto loaded = load_pool(dir.string());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded.env == pool.env);
  for (int i = 0; i < 2; ++i) {
    CHECK(loaded[i].seat(0).same_values(pool[i].seat(0)));
    CHECK(loaded[i].seat(1).same_values(pool[i].seat(1)));
    CHECK(loaded[i].selfplay_return == pool[i].selfplay_return);
    CHECK(loaded[i].provenance.seed == pool[i].provenance.seed);
    CHECK(loaded[i].provenance.shaping == pool[i].provenance.shaping);
    CHECK(loaded[i].provenance.family == pool[i].provenance.family);
  }
  std::filesystem::remove(dir / "manifest.json");
  CHECK_THROWS(load_pool(dir.string()));
  std::filesystem::remove_all(dir);
}

#pragma once

#include <string>
#include <vector>

#include "tbs/envs/env_spec.hpp"
#include "tbs/learners/policy.hpp"
#include "tbs/learners/trainer.hpp"

namespace tbs::pool {

// Immutable population of co-trained pairs. Pair indices are stable and are
// what every downstream matrix and cluster label refers to.
struct PartnerPool {
  envs::EnvSpec env;
  std::vector<learners::PolicyPair> pairs;

  std::size_t size() const { return pairs.size(); }
  const learners::PolicyPair& operator[](std::size_t i) const { return pairs[i]; }
  std::vector<std::uint64_t> seeds() const;
};

struct PoolOptions {
  // Signaling only: when > 0, pair i plants convention family i mod count by
  // giving Alice a bonus on that family's codebook events.
  int planted_families = 0;
  double planted_bonus = 0.5;
  // Stage name feeding seed derivation; training and held-out pools use
  // different names so their seeds never collide.
  std::string stage = "pool";
  int workers = 1;
  int max_retries = 3;
};

// Trains n self-play pairs, each with its own shaping draw and seed. A pair
// that diverges is retrained with a fresh seed up to max_retries times.
PartnerPool build_pool(const envs::EnvSpec& env, int n,
                       const learners::TrainConfig& config, std::uint64_t seed,
                       const PoolOptions& options = {});

// Held-out pool: same recipe, independent seed stream.
PartnerPool build_heldout_pool(const envs::EnvSpec& env, int n,
                               const learners::TrainConfig& config,
                               std::uint64_t seed, PoolOptions options = {});

// Seed used for attempt `attempt` of pair `index`.
std::uint64_t pair_seed(std::uint64_t seed, const std::string& stage, int index,
                        int attempt);

// Pools persist as a manifest (manifest.json) plus one policy file per seat.
void save_pool(const PartnerPool& pool, const std::string& dir,
               const std::string& config_hash);
PartnerPool load_pool(const std::string& dir);
nlohmann::json pool_manifest(const PartnerPool& pool, const std::string& config_hash);

}  // namespace tbs::pool

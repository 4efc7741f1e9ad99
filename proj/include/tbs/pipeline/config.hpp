#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "tbs/envs/env_spec.hpp"
#include "tbs/learners/trainer.hpp"
#include "tbs/tom/tom.hpp"

namespace tbs::pipeline {

struct PoolSettings {
  int train_size = 10;
  int heldout_size = 10;
  int planted_families = 0;
  double planted_bonus = 0.5;
  learners::TrainConfig train;
};

struct ClusterSettings {
  int k_min = 0;  // 0 = default range
  int k_max = 0;
  int k_fixed = 0;  // > 0 bypasses automatic k selection
  double tie_tolerance = 1e-3;
  int restarts = 8;
  int iterations = 500;
  double learning_rate = 0.05;
};

struct CoordinatorSettings {
  int window = 0;
  int steps_per_selection = 1;
};

struct EvalSettings {
  int episodes = 20;
  int bootstrap_resamples = 10000;
  std::vector<std::string> methods{"tbs", "single_br", "random_selection", "oracle"};
  std::vector<int> cooperator_seats;  // empty = environment default
};

struct RunConfig {
  envs::EnvSpec env;
  PoolSettings pool;
  int crossplay_episodes = 20;
  ClusterSettings cluster;
  learners::TrainConfig best_response;
  tom::ToMHyperparams tom;
  CoordinatorSettings coordinator;
  EvalSettings eval;
  std::uint64_t seed = 0;
  std::string artifact_dir = "artifacts";  // not part of the config hash

  // Defaults with per-environment training presets.
  static RunConfig defaults(envs::EnvKind kind);
  std::vector<int> cooperator_seats() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Missing fields take the defaults for the configured environment.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_config(const std::string& path);

// 16 hex digits of FNV-1a over the canonical (key-sorted, compact) JSON.
std::string hash_json(const nlohmann::json& j);
std::string config_hash(const RunConfig& c);

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"build-pool", "crossplay", "cluster",
                                              "train-br", "train-tom", "evaluate"};
  return names;
}

// Hash of everything the stage's output depends on, upstream included.
std::string stage_hash(const RunConfig& c, const std::string& stage);

}  // namespace tbs::pipeline

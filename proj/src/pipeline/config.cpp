#include "tbs/pipeline/config.hpp"

#include <cstdio>

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/core/random.hpp"

namespace tbs::pipeline {

RunConfig RunConfig::defaults(envs::EnvKind kind) {
  RunConfig c;
  c.env.kind = kind;
  c.pool.train = learners::TrainConfig::defaults_for(kind);
  c.best_response = learners::TrainConfig::defaults_for(kind);
  return c;
}

std::vector<int> RunConfig::cooperator_seats() const {
  if (!eval.cooperator_seats.empty()) {
    std::vector<int> seats;
    for (int s : eval.cooperator_seats) seats.push_back(s - 1);
    return seats;
  }
  // Signaling: the cooperator decodes as Bob.
  if (env.kind == envs::EnvKind::kSignaling) return {1};
  return {0, 1};
}

void RunConfig::validate() const {
  if (pool.train_size < 1 || pool.heldout_size < 1) throw ConfigError("pool sizes must be >= 1");
  if (crossplay_episodes < 1 || eval.episodes < 1) throw ConfigError("episode counts must be >= 1");
  if (cluster.k_fixed < 0) throw ConfigError("k_fixed must be >= 0");
  if (cluster.k_fixed > pool.train_size) throw ConfigError("k_fixed exceeds the pool size");
  if (coordinator.window < 0) throw ConfigError("window must be >= 0");
  if (coordinator.steps_per_selection < 1) throw ConfigError("steps_per_selection must be >= 1");
  for (int s : eval.cooperator_seats) {
    if (s != 1 && s != 2) throw ConfigError("cooperator seats are 1 or 2");
  }
  for (const auto& m : eval.methods) {
    if (m != "tbs" && m != "single_br" && m != "random_selection" && m != "oracle") {
      throw ConfigError("unknown method '" + m + "'");
    }
  }
  // Concept-set/environment compatibility.
  (void)envs::ConceptSet::make(env.kind, env.concepts);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"env", c.env},
       {"pool",
        {{"train_size", c.pool.train_size},
         {"heldout_size", c.pool.heldout_size},
         {"planted_families", c.pool.planted_families},
         {"planted_bonus", c.pool.planted_bonus},
         {"train", c.pool.train}}},
       {"crossplay_episodes", c.crossplay_episodes},
       {"cluster",
        {{"k_min", c.cluster.k_min},
         {"k_max", c.cluster.k_max},
         {"k_fixed", c.cluster.k_fixed},
         {"tie_tolerance", c.cluster.tie_tolerance},
         {"restarts", c.cluster.restarts},
         {"iterations", c.cluster.iterations},
         {"learning_rate", c.cluster.learning_rate}}},
       {"best_response", c.best_response},
       {"tom", c.tom},
       {"coordinator",
        {{"window", c.coordinator.window},
         {"steps_per_selection", c.coordinator.steps_per_selection}}},
       {"eval",
        {{"episodes", c.eval.episodes},
         {"bootstrap_resamples", c.eval.bootstrap_resamples},
         {"methods", c.eval.methods},
         {"cooperator_seats", c.eval.cooperator_seats}}},
       {"seed", c.seed},
       {"artifact_dir", c.artifact_dir}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  envs::EnvSpec env = j.value("env", envs::EnvSpec{});
  c = RunConfig::defaults(env.kind);
  c.env = env;
  auto train_config = [&](const nlohmann::json& src, learners::TrainConfig base) {
    nlohmann::json merged = base;
    merged.update(src);
    return merged.get<learners::TrainConfig>();
  };
  if (j.contains("pool")) {
    const auto& p = j.at("pool");
    c.pool.train_size = p.value("train_size", c.pool.train_size);
    c.pool.heldout_size = p.value("heldout_size", c.pool.heldout_size);
    c.pool.planted_families = p.value("planted_families", c.pool.planted_families);
    c.pool.planted_bonus = p.value("planted_bonus", c.pool.planted_bonus);
    if (p.contains("train")) c.pool.train = train_config(p.at("train"), c.pool.train);
  }
  c.crossplay_episodes = j.value("crossplay_episodes", c.crossplay_episodes);
  if (j.contains("cluster")) {
    const auto& k = j.at("cluster");
    c.cluster.k_min = k.value("k_min", c.cluster.k_min);
    c.cluster.k_max = k.value("k_max", c.cluster.k_max);
    c.cluster.k_fixed = k.value("k_fixed", c.cluster.k_fixed);
    c.cluster.tie_tolerance = k.value("tie_tolerance", c.cluster.tie_tolerance);
    c.cluster.restarts = k.value("restarts", c.cluster.restarts);
    c.cluster.iterations = k.value("iterations", c.cluster.iterations);
    c.cluster.learning_rate = k.value("learning_rate", c.cluster.learning_rate);
  }
  if (j.contains("best_response")) {
    c.best_response = train_config(j.at("best_response"), c.best_response);
  }
  if (j.contains("tom")) {
    nlohmann::json merged = c.tom;
    merged.update(j.at("tom"));
    c.tom = merged.get<tom::ToMHyperparams>();
  }
  if (j.contains("coordinator")) {
    const auto& k = j.at("coordinator");
    c.coordinator.window = k.value("window", c.coordinator.window);
    c.coordinator.steps_per_selection =
        k.value("steps_per_selection", c.coordinator.steps_per_selection);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.eval.episodes = e.value("episodes", c.eval.episodes);
    c.eval.bootstrap_resamples = e.value("bootstrap_resamples", c.eval.bootstrap_resamples);
    c.eval.methods = e.value("methods", c.eval.methods);
    c.eval.cooperator_seats = e.value("cooperator_seats", c.eval.cooperator_seats);
  }
  c.seed = j.value("seed", c.seed);
  c.artifact_dir = j.value("artifact_dir", c.artifact_dir);
  c.validate();
}

RunConfig load_config(const std::string& path) {
  try {
    return read_json(path).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config " + path + ": " + e.what());
  }
}

std::string hash_json(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::string config_hash(const RunConfig& c) {
  nlohmann::json j = c;
  j.erase("artifact_dir");
  return hash_json(j);
}

std::string stage_hash(const RunConfig& c, const std::string& stage) {
  const nlohmann::json full = c;
  nlohmann::json part;
  if (stage == "build-pool") {
    // Concept granularity only changes interaction labels, not training.
    envs::EnvSpec env = c.env;
    env.concepts = envs::Granularity::kGranular;
    part = {{"env", env}, {"pool", full.at("pool")}, {"seed", c.seed}};
  } else if (stage == "crossplay") {
    part = {{"up", stage_hash(c, "build-pool")}, {"episodes", c.crossplay_episodes}};
  } else if (stage == "cluster") {
    part = {{"up", stage_hash(c, "crossplay")}, {"cluster", full.at("cluster")}};
  } else if (stage == "train-br") {
    part = {{"up", stage_hash(c, "cluster")},
            {"best_response", full.at("best_response")},
            {"seats", c.cooperator_seats()}};
  } else if (stage == "train-tom") {
    part = {{"up", stage_hash(c, "train-br")},
            {"tom", full.at("tom")},
            {"concepts", envs::to_string(c.env.concepts)}};
  } else if (stage == "evaluate") {
    part = {{"up", stage_hash(c, "train-tom")},
            {"coordinator", full.at("coordinator")},
            {"eval", full.at("eval")}};
  } else {
    throw Error("unknown stage '" + stage + "'");
  }
  part["stage"] = stage;
  return hash_json(part);
}

}  // namespace tbs::pipeline

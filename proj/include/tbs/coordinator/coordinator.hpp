#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tbs/pool/pool.hpp"
#include "tbs/pool/rollout.hpp"
#include "tbs/tom/tom.hpp"

namespace tbs::coordinator {

// Everything a TBS cooperator needs for one seat: one best response and one
// ToM model per cluster, plus the global ToM model.
struct TBSEnsemble {
  int seat = 1;
  std::vector<learners::Policy> best_responses;
  std::vector<tom::ToMModel> cluster_models;
  tom::ToMModel global_model;

  int k() const { return static_cast<int>(best_responses.size()); }
  void validate() const;
};

struct TBSOptions {
  int window = 0;  // 0 = unbounded
  int steps_per_selection = 1;
  bool trace = false;
};

struct DecisionRecord {
  int timestep = 0;
  std::vector<double> accumulators;
  int active_index = 0;
  int action = 0;
};

class TBSAgent final : public pool::Actor {
 public:
  TBSAgent(std::shared_ptr<const TBSEnsemble> ensemble, TBSOptions options = {});

  // Zeroes the accumulators and draws the initial policy uniformly.
  void reset(std::uint64_t seed);
  // Feeds one observation to every ToM model and adds this step's
  // per-cluster divergence from the global model.
  void observe_and_update(const envs::Observation& obs);
  // Reselects at t > 0 with t mod n == 0, then plays the active policy.
  int act_after_update(const envs::Observation& obs, int timestep, Rng& rng);

  void begin_episode(std::uint64_t seed) override { reset(seed); }
  int act(const envs::Observation& obs, int timestep, Rng& rng) override;

  int active_index() const { return active_; }
  const std::vector<double>& accumulators() const { return acc_; }
  // Divergence increments of the most recent step.
  const std::vector<double>& last_increments() const { return last_inc_; }
  const std::vector<DecisionRecord>& decision_log() const { return log_; }
  const TBSOptions& options() const { return options_; }

 private:
  void select();

  std::shared_ptr<const TBSEnsemble> ensemble_;
  TBSOptions options_;
  tom::HistoryFeaturizer featurizer_;
  std::vector<double> acc_;
  std::vector<double> last_inc_;
  std::deque<std::vector<double>> ring_;
  std::vector<DecisionRecord> log_;
  int active_ = 0;
};

// Index minimizing `values`; ties keep `current` when it is among the
// minima, otherwise go to the lowest index.
int argmin_with_hysteresis(const std::vector<double>& values, int current);

// Plays one pool policy, drawn uniformly per episode, for the whole episode.
class RandomSelectionActor final : public pool::Actor {
 public:
  RandomSelectionActor(const pool::PartnerPool& pool, int seat)
      : pool_(&pool), seat_(seat) {}
  void begin_episode(std::uint64_t seed) override;
  int act(const envs::Observation& obs, int timestep, Rng& rng) override;
  int current() const { return current_; }

 private:
  const pool::PartnerPool* pool_;
  int seat_;
  int current_ = 0;
};

// The policy co-trained with the partner.
pool::PolicyActor oracle_actor(const learners::PolicyPair& partner, int seat);

void write_decision_log_csv(const std::string& path,
                            const std::vector<DecisionRecord>& log);

}  // namespace tbs::coordinator

#pragma once

#include <deque>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbs/envs/env_spec.hpp"
#include "tbs/pool/pool.hpp"
#include "tbs/pool/rollout.hpp"

namespace tbs::tom {

// c_t for one agent: the interaction vector of that agent's next interact at
// or after t, all zero when it never interacts again.
using ConceptLabelSequence = std::vector<envs::InteractionVector>;

ConceptLabelSequence extract_concept_labels(const pool::Trajectory& trajectory,
                                            int agent);

// Bernoulli KL with both probabilities clamped to [1e-6, 1 - 1e-6].
inline constexpr double kProbabilityClamp = 1e-6;
double kl_bernoulli(double p, double q);
// Sum of per-concept Bernoulli KLs.
double kl_bernoulli_sum(const std::vector<double>& p, const std::vector<double>& q);

// Layout of the history features shared by every model of an environment:
// [observation one-hots | decayed partner-event counts | steps-left one-hot |
//  time fraction | bias].
struct FeatureSpec {
  std::vector<int> cardinalities;
  int partner_event_component = -1;
  int event_channels = 0;  // partner event values excluding "none"
  int horizon = 1;
  // One-hot of min(steps left, ending_steps - 1) before the horizon.
  int ending_steps = 8;
  double decay = 0.9;
  // Only the last `window` partner events enter the counts; 0 = all.
  int window = 0;
  int version = 1;

  static FeatureSpec for_env(const envs::EnvSpec& env);
  int size() const;
  bool operator==(const FeatureSpec&) const = default;
};

struct SparseFeatures {
  std::vector<int> index;
  std::vector<double> value;
};

// Turns an observation stream into features, one observation at a time.
class HistoryFeaturizer {
 public:
  explicit HistoryFeaturizer(FeatureSpec spec);
  void reset();
  // Consumes the observation at the next timestep and returns its features.
  SparseFeatures push(const envs::Observation& obs);
  const FeatureSpec& spec() const { return spec_; }

 private:
  FeatureSpec spec_;
  std::vector<double> counts_;
  std::deque<int> recent_;
  int t_ = 0;
};

struct ToMScope {
  bool global = true;
  int cluster = -1;
  std::string name() const;
  bool operator==(const ToMScope&) const = default;
};

// Per-concept logistic regression over history features.
class ToMModel {
 public:
  ToMModel() = default;
  ToMModel(ToMScope scope, envs::ConceptSet concepts, FeatureSpec features);

  const ToMScope& scope() const { return scope_; }
  const envs::ConceptSet& concepts() const { return concepts_; }
  const FeatureSpec& features() const { return features_; }
  int num_concepts() const { return static_cast<int>(concepts_.size()); }

  // Weight of feature f for concept j.
  double& weight(int f, int j) { return weights_[static_cast<std::size_t>(f) * num_concepts() + j]; }
  double weight(int f, int j) const { return weights_[static_cast<std::size_t>(f) * num_concepts() + j]; }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  // Logits clamped to [-30, 30]; probabilities are their sigmoids.
  void logits(const SparseFeatures& x, std::vector<double>& out) const;
  std::vector<double> predict(const SparseFeatures& x) const;

  nlohmann::json to_json() const;
  static ToMModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ToMModel load(const std::string& path);

 private:
  ToMScope scope_;
  envs::ConceptSet concepts_;
  FeatureSpec features_;
  std::vector<double> weights_;
};

// Probabilities after consuming a full observer history (oldest first).
std::vector<double> predict_concepts(const ToMModel& model,
                                     const std::vector<envs::Observation>& history,
                                     const envs::ConceptSet* expected = nullptr);

// One episode as seen by the observer: features and partner concept labels.
struct ToMEpisode {
  std::vector<envs::Observation> observations;
  std::vector<SparseFeatures> features;
  ConceptLabelSequence labels;
};

struct ToMDataset {
  FeatureSpec features;
  envs::ConceptSet concepts;
  std::vector<ToMEpisode> episodes;
  std::size_t samples() const;
};

// Builds a dataset from recorded trajectories: features from `observer`'s
// observations, labels from `partner`'s interactions.
ToMDataset make_dataset(const std::vector<pool::Trajectory>& trajectories,
                        const envs::EnvSpec& env, int observer);

// Per-episode records of (observer observation, label vector). Features are
// recomputed on load.
nlohmann::json dataset_to_json(const ToMDataset& data);
ToMDataset dataset_from_json(const nlohmann::json& j);

struct ToMHyperparams {
  int epochs = 200;
  double learning_rate = 1.0;
  double lr_decay = 0.01;  // step = lr / (1 + decay * epoch)
  double l2 = 1e-4;
  int episodes_per_pairing = 50;
  double partner_noise = 0.05;
  int max_backtracks = 30;
};

void to_json(nlohmann::json& j, const ToMHyperparams& h);
void from_json(const nlohmann::json& j, ToMHyperparams& h);

struct TrainingTrace {
  std::vector<double> loss;  // mean BCE + L2 after each epoch, [0] = initial
};

// Full-batch gradient descent on the mean binary cross-entropy, with
// backtracking so that the objective never increases.
ToMModel train_tom(const ToMDataset& data, ToMScope scope,
                   const ToMHyperparams& hp, TrainingTrace* trace = nullptr);

// Mean BCE (summed over concepts) of the model on the dataset.
double mean_bce(const ToMModel& model, const ToMDataset& data);

// Trajectories of each partner pair in `partners` (playing partner_seat with
// exploration noise) alongside `cooperator` in the other seat.
std::vector<pool::Trajectory> generate_trajectories(
    const pool::PartnerPool& pool, const std::vector<int>& partners,
    const learners::Policy& cooperator, int partner_seat, int episodes_per_pairing,
    double partner_noise, std::uint64_t seed);

}  // namespace tbs::tom

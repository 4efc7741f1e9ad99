#include "tbs/coordinator/coordinator.hpp"

#include <sstream>

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"

namespace tbs::coordinator {

void TBSEnsemble::validate() const {
  if (best_responses.empty()) throw Error("TBS ensemble has no best responses");
  if (cluster_models.size() != best_responses.size()) {
    throw Error("TBS ensemble needs one ToM model per best response");
  }
  for (const auto& m : cluster_models) {
    if (!(m.concepts() == global_model.concepts()) ||
        !(m.features() == global_model.features())) {
      throw Error("cluster and global ToM models disagree on concepts or features");
    }
  }
  if (seat != 0 && seat != 1) throw Error("TBS seat must be 0 or 1");
}

int argmin_with_hysteresis(const std::vector<double>& values, int current) {
  if (values.empty()) throw Error("argmin of an empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] < values[best]) best = i;
  }
  if (current >= 0 && current < static_cast<int>(values.size()) &&
      values[current] == values[best]) {
    return current;
  }
  return best;
}

TBSAgent::TBSAgent(std::shared_ptr<const TBSEnsemble> ensemble, TBSOptions options)
    : ensemble_(std::move(ensemble)),
      options_(options),
      featurizer_(ensemble_->global_model.features()) {
  ensemble_->validate();
  if (options_.window < 0) throw ConfigError("window must be >= 0");
  if (options_.steps_per_selection < 1) throw ConfigError("steps per selection must be >= 1");
  reset(0);
}

void TBSAgent::reset(std::uint64_t seed) {
  const int k = ensemble_->k();
  acc_.assign(k, 0.0);
  last_inc_.assign(k, 0.0);
  ring_.clear();
  log_.clear();
  featurizer_.reset();
  Rng rng(derive_seed(seed, "tbs-initial"));
  active_ = uniform_int(rng, k);
}

void TBSAgent::observe_and_update(const envs::Observation& obs) {
  const auto x = featurizer_.push(obs);
  const auto global = ensemble_->global_model.predict(x);
  for (int i = 0; i < ensemble_->k(); ++i) {
    last_inc_[i] = tom::kl_bernoulli_sum(ensemble_->cluster_models[i].predict(x), global);
  }
  if (options_.window > 0) {
    ring_.push_back(last_inc_);
    if (static_cast<int>(ring_.size()) > options_.window) ring_.pop_front();
    // Re-summing keeps the window exact regardless of rounding drift.
    std::fill(acc_.begin(), acc_.end(), 0.0);
    for (const auto& inc : ring_) {
      for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i] += inc[i];
    }
  } else {
    for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i] += last_inc_[i];
  }
}

void TBSAgent::select() { active_ = argmin_with_hysteresis(acc_, active_); }

int TBSAgent::act_after_update(const envs::Observation& obs, int timestep, Rng& rng) {
  if (timestep > 0 && timestep % options_.steps_per_selection == 0) select();
  const int action = ensemble_->best_responses[active_].act(obs, rng);
  if (options_.trace) log_.push_back({timestep, acc_, active_, action});
  return action;
}

int TBSAgent::act(const envs::Observation& obs, int timestep, Rng& rng) {
  observe_and_update(obs);
  return act_after_update(obs, timestep, rng);
}

void RandomSelectionActor::begin_episode(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "random-selection"));
  current_ = uniform_int(rng, static_cast<int>(pool_->size()));
}

int RandomSelectionActor::act(const envs::Observation& obs, int, Rng& rng) {
  return (*pool_)[current_].seat(seat_).act(obs, rng);
}

pool::PolicyActor oracle_actor(const learners::PolicyPair& partner, int seat) {
  return pool::PolicyActor(partner.seat(seat));
}

void write_decision_log_csv(const std::string& path,
                            const std::vector<DecisionRecord>& log) {
  std::ostringstream out;
  out.precision(10);
  const std::size_t k = log.empty() ? 0 : log.front().accumulators.size();
  out << "timestep";
  for (std::size_t i = 0; i < k; ++i) out << ",accumulator_" << i;
  out << ",active_index,action\n";
  for (const auto& r : log) {
    out << r.timestep;
    for (double a : r.accumulators) out << ',' << a;
    out << ',' << r.active_index << ',' << r.action << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace tbs::coordinator

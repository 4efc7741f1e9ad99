#include "tbs/tom/tom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"

namespace tbs::tom {

ConceptLabelSequence extract_concept_labels(const pool::Trajectory& trajectory,
                                            int agent) {
  const auto& steps = trajectory.steps;
  const std::size_t T = steps.size();
  const std::size_t width = T ? steps[0].interactions[agent].size() : 0;
  auto interacts = [&](std::size_t t) {
    const auto& v = steps[t].interactions[agent];
    return std::any_of(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; });
  };
  ConceptLabelSequence labels(T, envs::InteractionVector(width, 0));
  std::size_t next = 0;  // first interact index >= t, or T
  for (std::size_t t = 0; t < T; ++t) {
    if (next < t) next = t;
    while (next < T && !interacts(next)) ++next;
    if (next == T) break;
    labels[t] = steps[next].interactions[agent];
  }
  return labels;
}

double kl_bernoulli(double p, double q) {
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  q = std::clamp(q, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double kl = p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return std::max(0.0, kl);
}

double kl_bernoulli_sum(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw Error("concept vectors differ in length");
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) total += kl_bernoulli(p[j], q[j]);
  return total;
}

FeatureSpec FeatureSpec::for_env(const envs::EnvSpec& env) {
  const auto e = envs::make_env(env);
  const auto& obs = e->observation_spec();
  FeatureSpec f;
  f.cardinalities = obs.cardinalities;
  f.partner_event_component = obs.partner_event_component;
  f.event_channels = obs.partner_event_component >= 0
                         ? obs.cardinalities[obs.partner_event_component] - 1
                         : 0;
  f.horizon = std::max(1, e->horizon());
  return f;
}

int FeatureSpec::size() const {
  return std::accumulate(cardinalities.begin(), cardinalities.end(), 0) +
         event_channels + ending_steps + 2;
}

HistoryFeaturizer::HistoryFeaturizer(FeatureSpec spec) : spec_(std::move(spec)) {
  reset();
}

void HistoryFeaturizer::reset() {
  counts_.assign(spec_.event_channels, 0.0);
  recent_.clear();
  t_ = 0;
}

SparseFeatures HistoryFeaturizer::push(const envs::Observation& obs) {
  if (obs.size() != spec_.cardinalities.size()) {
    throw Error("observation does not match the feature spec");
  }
  SparseFeatures x;
  int offset = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const int card = spec_.cardinalities[i];
    x.index.push_back(offset + std::clamp(obs[i], 0, card - 1));
    x.value.push_back(1.0);
    offset += card;
  }
  if (spec_.event_channels > 0) {
    const int event = obs[spec_.partner_event_component];
    if (spec_.window > 0) {
      recent_.push_back(event);
      if (static_cast<int>(recent_.size()) > spec_.window) recent_.pop_front();
      std::fill(counts_.begin(), counts_.end(), 0.0);
      double w = 1.0;
      for (auto it = recent_.rbegin(); it != recent_.rend(); ++it, w *= spec_.decay) {
        if (*it > 0) counts_[*it - 1] += w;
      }
    } else {
      for (double& c : counts_) c *= spec_.decay;
      if (event > 0) counts_[event - 1] += 1.0;
    }
    for (int c = 0; c < spec_.event_channels; ++c) {
      if (counts_[c] != 0.0) {
        x.index.push_back(offset + c);
        x.value.push_back(counts_[c]);
      }
    }
  }
  offset += spec_.event_channels;
  if (spec_.ending_steps > 0) {
    const int left = std::max(0, spec_.horizon - 1 - t_);
    x.index.push_back(offset + std::min(left, spec_.ending_steps - 1));
    x.value.push_back(1.0);
    offset += spec_.ending_steps;
  }
  x.index.push_back(offset);
  x.value.push_back(std::min(1.0, static_cast<double>(t_) / spec_.horizon));
  x.index.push_back(offset + 1);
  x.value.push_back(1.0);
  ++t_;
  return x;
}

std::string ToMScope::name() const {
  return global ? "global" : "cluster_" + std::to_string(cluster);
}

ToMModel::ToMModel(ToMScope scope, envs::ConceptSet concepts, FeatureSpec features)
    : scope_(scope), concepts_(std::move(concepts)), features_(std::move(features)) {
  weights_.assign(static_cast<std::size_t>(features_.size()) * concepts_.size(), 0.0);
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double clamp_logit(double z) { return std::clamp(z, -30.0, 30.0); }
// log(1 + e^z), stable for large |z|.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

void ToMModel::logits(const SparseFeatures& x, std::vector<double>& out) const {
  const int C = num_concepts();
  out.assign(C, 0.0);
  for (std::size_t n = 0; n < x.index.size(); ++n) {
    const double* w = &weights_[static_cast<std::size_t>(x.index[n]) * C];
    const double v = x.value[n];
    for (int j = 0; j < C; ++j) out[j] += v * w[j];
  }
  for (double& z : out) z = clamp_logit(z);
}

std::vector<double> ToMModel::predict(const SparseFeatures& x) const {
  std::vector<double> z;
  logits(x, z);
  for (double& v : z) v = sigmoid(v);
  return z;
}

nlohmann::json ToMModel::to_json() const {
  return {{"format", "tbs.tom"},
          {"version", 1},
          {"scope", {{"global", scope_.global}, {"cluster", scope_.cluster}}},
          {"env", envs::to_string(concepts_.env())},
          {"concept_set", concepts_.name()},
          {"features",
           {{"version", features_.version},
            {"cardinalities", features_.cardinalities},
            {"partner_event_component", features_.partner_event_component},
            {"event_channels", features_.event_channels},
            {"horizon", features_.horizon},
            {"ending_steps", features_.ending_steps},
            {"decay", features_.decay},
            {"window", features_.window}}},
          {"weights", weights_}};
}

ToMModel ToMModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "tbs.tom") throw Error("not a ToM model artifact");
  if (j.value("version", 0) != 1) throw Error("unsupported ToM model version");
  ToMScope scope{j.at("scope").at("global").get<bool>(),
                 j.at("scope").at("cluster").get<int>()};
  const auto concepts = envs::ConceptSet::make(
      envs::parse_env_kind(j.at("env").get<std::string>()),
      j.at("concept_set").get<std::string>());
  const auto& f = j.at("features");
  FeatureSpec spec;
  spec.version = f.at("version").get<int>();
  spec.cardinalities = f.at("cardinalities").get<std::vector<int>>();
  spec.partner_event_component = f.at("partner_event_component").get<int>();
  spec.event_channels = f.at("event_channels").get<int>();
  spec.horizon = f.at("horizon").get<int>();
  spec.ending_steps = f.at("ending_steps").get<int>();
  spec.decay = f.at("decay").get<double>();
  spec.window = f.at("window").get<int>();
  ToMModel m(scope, concepts, spec);
  auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != m.weights_.size()) throw Error("ToM weight count mismatch");
  m.weights_ = std::move(w);
  return m;
}

void ToMModel::save(const std::string& path) const {
  write_file_atomic(path, to_json().dump() + "\n");
}

ToMModel ToMModel::load(const std::string& path) { return from_json(read_json(path)); }

std::vector<double> predict_concepts(const ToMModel& model,
                                     const std::vector<envs::Observation>& history,
                                     const envs::ConceptSet* expected) {
  if (history.empty()) throw Error("observation history is empty");
  if (expected && !(*expected == model.concepts())) {
    throw Error("ToM model concept set " + model.concepts().name() +
                " does not match the environment's " + expected->name());
  }
  HistoryFeaturizer f(model.features());
  SparseFeatures x;
  for (const auto& o : history) x = f.push(o);
  return model.predict(x);
}

std::size_t ToMDataset::samples() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.features.size();
  return n;
}

ToMDataset make_dataset(const std::vector<pool::Trajectory>& trajectories,
                        const envs::EnvSpec& env, int observer) {
  ToMDataset data;
  data.features = FeatureSpec::for_env(env);
  data.concepts = envs::ConceptSet::make(env.kind, env.concepts);
  HistoryFeaturizer f(data.features);
  for (const auto& traj : trajectories) {
    ToMEpisode ep;
    f.reset();
    for (const auto& step : traj.steps) {
      ep.observations.push_back(step.observations[observer]);
      ep.features.push_back(f.push(step.observations[observer]));
    }
    ep.labels = extract_concept_labels(traj, 1 - observer);
    data.episodes.push_back(std::move(ep));
  }
  return data;
}

nlohmann::json dataset_to_json(const ToMDataset& data) {
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& e : data.episodes) {
    episodes.push_back({{"observations", e.observations}, {"labels", e.labels}});
  }
  return {{"format", "tbs.tom_dataset"},
          {"version", 1},
          {"env", envs::to_string(data.concepts.env())},
          {"concept_set", data.concepts.name()},
          {"feature_horizon", data.features.horizon},
          {"cardinalities", data.features.cardinalities},
          {"partner_event_component", data.features.partner_event_component},
          {"episodes", episodes}};
}

ToMDataset dataset_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "tbs.tom_dataset") throw Error("not a ToM dataset");
  ToMDataset data;
  data.concepts = envs::ConceptSet::make(envs::parse_env_kind(j.at("env").get<std::string>()),
                                         j.at("concept_set").get<std::string>());
  data.features.cardinalities = j.at("cardinalities").get<std::vector<int>>();
  data.features.partner_event_component = j.at("partner_event_component").get<int>();
  data.features.event_channels =
      data.features.partner_event_component >= 0
          ? data.features.cardinalities[data.features.partner_event_component] - 1
          : 0;
  data.features.horizon = j.at("feature_horizon").get<int>();
  HistoryFeaturizer f(data.features);
  for (const auto& e : j.at("episodes")) {
    ToMEpisode ep;
    ep.observations = e.at("observations").get<std::vector<envs::Observation>>();
    ep.labels = e.at("labels").get<ConceptLabelSequence>();
    f.reset();
    for (const auto& o : ep.observations) ep.features.push_back(f.push(o));
    data.episodes.push_back(std::move(ep));
  }
  return data;
}

void to_json(nlohmann::json& j, const ToMHyperparams& h) {
  j = {{"epochs", h.epochs},
       {"learning_rate", h.learning_rate},
       {"lr_decay", h.lr_decay},
       {"l2", h.l2},
       {"episodes_per_pairing", h.episodes_per_pairing},
       {"partner_noise", h.partner_noise},
       {"max_backtracks", h.max_backtracks}};
}

void from_json(const nlohmann::json& j, ToMHyperparams& h) {
  ToMHyperparams d;
  h.epochs = j.value("epochs", d.epochs);
  h.learning_rate = j.value("learning_rate", d.learning_rate);
  h.lr_decay = j.value("lr_decay", d.lr_decay);
  h.l2 = j.value("l2", d.l2);
  h.episodes_per_pairing = j.value("episodes_per_pairing", d.episodes_per_pairing);
  h.partner_noise = j.value("partner_noise", d.partner_noise);
  h.max_backtracks = j.value("max_backtracks", d.max_backtracks);
  if (h.epochs < 0 || h.learning_rate <= 0.0) throw ConfigError("invalid ToM hyperparameters");
}

namespace {

// Objective (mean summed BCE + L2/2 ||w||^2) and optionally its gradient.
double objective(const ToMModel& model, const ToMDataset& data, double l2,
                 std::vector<double>* grad) {
  const int C = model.num_concepts();
  const std::size_t N = data.samples();
  const auto& w = model.weights();
  if (grad) grad->assign(w.size(), 0.0);
  double loss = 0.0;
  std::vector<double> z;
  for (const auto& ep : data.episodes) {
    for (std::size_t t = 0; t < ep.features.size(); ++t) {
      const auto& x = ep.features[t];
      const auto& y = ep.labels[t];
      model.logits(x, z);
      for (int j = 0; j < C; ++j) {
        loss += softplus(z[j]) - (y[j] ? z[j] : 0.0);
        z[j] = sigmoid(z[j]) - (y[j] ? 1.0 : 0.0);
      }
      if (grad) {
        for (std::size_t n = 0; n < x.index.size(); ++n) {
          double* g = &(*grad)[static_cast<std::size_t>(x.index[n]) * C];
          const double v = x.value[n];
          for (int j = 0; j < C; ++j) g[j] += v * z[j];
        }
      }
    }
  }
  const double inv = N ? 1.0 / static_cast<double>(N) : 0.0;
  loss *= inv;
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sq += w[i] * w[i];
    if (grad) (*grad)[i] = (*grad)[i] * inv + l2 * w[i];
  }
  return loss + 0.5 * l2 * sq;
}

}  // namespace

double mean_bce(const ToMModel& model, const ToMDataset& data) {
  return objective(model, data, 0.0, nullptr);
}

ToMModel train_tom(const ToMDataset& data, ToMScope scope, const ToMHyperparams& hp,
                   TrainingTrace* trace) {
  if (data.samples() == 0) {
    throw Error("empty ToM dataset for scope " + scope.name());
  }
  ToMModel model(scope, data.concepts, data.features);
  const int C = model.num_concepts();
  // Start the bias at the label log-odds.
  const int bias = data.features.size() - 1;
  for (int j = 0; j < C; ++j) {
    double positives = 0.0;
    for (const auto& ep : data.episodes) {
      for (const auto& y : ep.labels) positives += y[j];
    }
    const double p = std::clamp(positives / static_cast<double>(data.samples()), 1e-3, 1.0 - 1e-3);
    model.weight(bias, j) = std::log(p / (1.0 - p));
  }
  // Accelerated gradient descent. A momentum step that would raise the loss
  // resets the momentum and falls back to a backtracked gradient step, so the
  // loss never increases.
  std::vector<double> grad;
  std::vector<double> trial_grad;
  double loss = objective(model, data, hp.l2, &grad);
  if (trace) trace->loss = {loss};
  std::vector<double> previous = model.weights();
  double momentum_t = 1.0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    double step = hp.learning_rate / (1.0 + hp.lr_decay * epoch);
    const std::vector<double> w0 = model.weights();
    const double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
    const double beta = (momentum_t - 1.0) / next_t;
    bool accepted = false;
    if (beta > 0.0) {
      auto& w = model.weights();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = w0[i] + beta * (w0[i] - previous[i]);
      objective(model, data, hp.l2, &trial_grad);
      const std::vector<double> y = model.weights();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = y[i] - step * trial_grad[i];
      const double next = objective(model, data, hp.l2, &trial_grad);
      if (next <= loss) {
        loss = next;
        grad.swap(trial_grad);
        momentum_t = next_t;
        accepted = true;
      } else {
        momentum_t = 1.0;
      }
    } else {
      momentum_t = next_t;
    }
    for (int b = 0; !accepted && b <= hp.max_backtracks; ++b, step *= 0.5) {
      auto& w = model.weights();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = w0[i] - step * grad[i];
      const double next = objective(model, data, hp.l2, &trial_grad);
      if (next <= loss) {
        loss = next;
        grad.swap(trial_grad);
        accepted = true;
      }
    }
    if (!accepted) {
      model.weights() = w0;
      if (trace) trace->loss.push_back(loss);
      break;
    }
    previous = w0;
    if (trace) trace->loss.push_back(loss);
  }
  return model;
}

std::vector<pool::Trajectory> generate_trajectories(
    const pool::PartnerPool& pool, const std::vector<int>& partners,
    const learners::Policy& cooperator, int partner_seat, int episodes_per_pairing,
    double partner_noise, std::uint64_t seed) {
  std::vector<pool::Trajectory> out;
  for (int p : partners) {
    pool::PolicyActor partner(pool[p].seat(partner_seat), partner_noise);
    pool::PolicyActor coop(cooperator);
    auto r = partner_seat == 0
                 ? pool::rollout(partner, coop, pool.env, episodes_per_pairing,
                                 derive_seed(seed, "tom-episodes", p), true)
                 : pool::rollout(coop, partner, pool.env, episodes_per_pairing,
                                 derive_seed(seed, "tom-episodes", p), true);
    for (auto& t : r.trajectories) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace tbs::tom

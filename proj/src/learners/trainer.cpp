#include "tbs/learners/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tbs/core/errors.hpp"
#include "tbs/learners/lambda_targets.hpp"
#include "tbs/pool/rollout.hpp"

namespace tbs::learners {

TrainConfig TrainConfig::defaults_for(envs::EnvKind kind) {
  TrainConfig c;
  if (kind == envs::EnvKind::kSignaling) c.epsilon_floor = 0.1;
  return c;
}

double TrainConfig::epsilon(long step) const {
  const double horizon = epsilon_anneal_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0 || step >= horizon) return epsilon_floor;
  const double frac = static_cast<double>(step) / horizon;
  return epsilon_start + frac * (epsilon_floor - epsilon_start);
}

double TrainConfig::learning_rate_at(long step) const {
  if (!lr_decay || total_steps <= 0) return learning_rate;
  return learning_rate *
         std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

double TrainConfig::default_shaping_multiplier(long step) const {
  const double horizon = shaping_horizon_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0 || step >= horizon) return 0.0;
  return 1.0 - static_cast<double>(step) / horizon;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"gamma", c.gamma},
                     {"lambda", c.lambda},
                     {"epsilon_anneal_fraction", c.epsilon_anneal_fraction},
                     {"epsilon_start", c.epsilon_start},
                     {"epsilon_floor", c.epsilon_floor},
                     {"learning_rate", c.learning_rate},
                     {"lr_decay", c.lr_decay},
                     {"total_steps", c.total_steps},
                     {"segment_length", c.segment_length},
                     {"shaping_horizon_fraction", c.shaping_horizon_fraction},
                     {"representation", to_string(c.representation)},
                     {"seed", c.seed},
                     {"eval_episodes", c.eval_episodes}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.gamma = j.value("gamma", d.gamma);
  c.lambda = j.value("lambda", d.lambda);
  c.epsilon_anneal_fraction = j.value("epsilon_anneal_fraction", d.epsilon_anneal_fraction);
  c.epsilon_start = j.value("epsilon_start", d.epsilon_start);
  c.epsilon_floor = j.value("epsilon_floor", d.epsilon_floor);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.lr_decay = j.value("lr_decay", d.lr_decay);
  c.total_steps = j.value("total_steps", d.total_steps);
  c.segment_length = j.value("segment_length", d.segment_length);
  c.shaping_horizon_fraction = j.value("shaping_horizon_fraction", d.shaping_horizon_fraction);
  c.representation = parse_representation(
      j.value("representation", std::string(to_string(d.representation))));
  c.seed = j.value("seed", d.seed);
  c.eval_episodes = j.value("eval_episodes", d.eval_episodes);
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (c.lambda < 0.0 || c.lambda > 1.0) throw ConfigError("lambda must be in [0, 1]");
  if (c.segment_length < 1) throw ConfigError("segment_length must be >= 1");
}

namespace {

double dot_events(const std::vector<double>& w, const envs::EventVector& ev) {
  double r = 0.0;
  for (std::size_t e = 0; e < ev.size() && e < w.size(); ++e) {
    if (ev[e]) r += w[e];
  }
  return r;
}

int epsilon_greedy(const ValueFunction& vf, const Encoded& e, double epsilon,
                   Rng& rng) {
  if (uniform01(rng) < epsilon) return uniform_int(rng, vf.action_count());
  return vf.greedy(e);
}

[[noreturn]] void diverged(const char* what, const TrainConfig& c, long step) {
  std::ostringstream msg;
  msg << what << " produced a non-finite value at step " << step
      << " (seed " << c.seed << ", lr " << c.learning_rate << ", gamma "
      << c.gamma << ", lambda " << c.lambda << ")";
  throw DivergenceError(msg.str());
}

// Transitions of one segment for N learning agents.
template <int N>
struct Segment {
  std::vector<std::array<Encoded, N>> encoded;
  std::vector<std::array<int, N>> actions;
  std::vector<double> rewards;
  void clear() {
    encoded.clear();
    actions.clear();
    rewards.clear();
  }
  std::size_t size() const { return rewards.size(); }
};

}  // namespace

PolicyPair train_selfplay_pair(const envs::EnvSpec& spec,
                               const std::array<ShapingSpec, 2>& shaping,
                               const TrainConfig& config) {
  auto env = envs::make_env(spec);
  const auto& obs_spec = env->observation_spec();
  std::array<ValueFunction, 2> q = {
      ValueFunction::make(config.representation, env->num_actions(0), obs_spec),
      ValueFunction::make(config.representation, env->num_actions(1), obs_spec)};
  const std::vector<double> built_in = env->default_shaping();
  Rng rng(derive_seed(config.seed, "selfplay-explore"));

  long step = 0;
  int episode = 0;
  env->reset(derive_seed(config.seed, "selfplay-episode", episode));
  Segment<2> seg;
  std::vector<double> next_values;
  while (step < config.total_steps) {
    seg.clear();
    bool terminal = false;
    while (static_cast<int>(seg.size()) < config.segment_length &&
           step < config.total_steps) {
      std::array<Encoded, 2> enc;
      envs::JointAction a{};
      const double eps = config.epsilon(step);
      for (int i = 0; i < 2; ++i) {
        enc[i] = q[i].encode(env->observe(i));
        a[i] = epsilon_greedy(q[i], enc[i], eps, rng);
      }
      envs::StepOutcome out = env->step(a);
      double r = out.reward;
      const double anneal = config.default_shaping_multiplier(step);
      for (int i = 0; i < 2; ++i) {
        if (anneal > 0.0) r += anneal * dot_events(built_in, out.game_events[i]);
        r += shaping[i].reward(out.game_events[i], step);
      }
      seg.encoded.push_back(std::move(enc));
      seg.actions.push_back({a[0], a[1]});
      seg.rewards.push_back(r);
      ++step;
      if (out.done) {
        terminal = true;
        break;
      }
    }
    const std::size_t n = seg.size();
    next_values.assign(n, 0.0);
    for (std::size_t t = 0; t + 1 < n; ++t) {
      next_values[t] = q[0].max_value(seg.encoded[t + 1][0]) +
                       q[1].max_value(seg.encoded[t + 1][1]);
    }
    if (!terminal && n > 0) {
      next_values[n - 1] = q[0].max_value(q[0].encode(env->observe(0))) +
                           q[1].max_value(q[1].encode(env->observe(1)));
    }
    const auto targets =
        compute_lambda_targets(seg.rewards, next_values, config.gamma, config.lambda);
    const double lr = config.learning_rate_at(step);
    for (std::size_t t = 0; t < n; ++t) {
      const auto& enc = seg.encoded[t];
      const auto& a = seg.actions[t];
      const double joint = q[0].value(enc[0], a[0]) + q[1].value(enc[1], a[1]);
      const double delta = targets[t] - joint;
      if (!std::isfinite(delta)) diverged("self-play training", config, step);
      if (lr > 0.0) {
        for (int i = 0; i < 2; ++i) q[i].add(enc[i], a[i], lr * delta);
      }
    }
    if (terminal) env->reset(derive_seed(config.seed, "selfplay-episode", ++episode));
  }
  for (const auto& vf : q) {
    if (!vf.all_finite()) diverged("self-play training", config, step);
  }

  PolicyPair pair;
  for (int i = 0; i < 2; ++i) {
    pair.seats[i] = Policy(std::move(q[i]),
                           PolicyProvenance{"selfplay", config.seed,
                                            shaping[i].coefficients, ""});
  }
  pair.provenance.seed = config.seed;
  pair.provenance.shaping = shaping;
  if (config.eval_episodes > 0) {
    pair.selfplay_return =
        pool::rollout(pair.seats[0], pair.seats[1], spec, config.eval_episodes,
                      derive_seed(config.seed, "selfplay-eval"), false)
            .mean_return;
  }
  return pair;
}

Policy train_best_response(const envs::EnvSpec& spec,
                           std::span<const PolicyPair> partners, int seat,
                           const TrainConfig& config) {
  if (partners.empty()) throw Error("best response needs a nonempty partner set");
  if (seat != 0 && seat != 1) throw Error("seat must be 0 or 1");
  auto env = envs::make_env(spec);
  const int other = 1 - seat;
  ValueFunction q = ValueFunction::make(config.representation,
                                        env->num_actions(seat),
                                        env->observation_spec());
  const std::vector<double> built_in = env->default_shaping();
  Rng rng(derive_seed(config.seed, "br-explore"));
  Rng partner_rng(derive_seed(config.seed, "br-partner"));

  long step = 0;
  int episode = 0;
  const int n_partners = static_cast<int>(partners.size());
  auto start_episode = [&] {
    env->reset(derive_seed(config.seed, "br-episode", episode++));
    return &partners[uniform_int(partner_rng, n_partners)].seat(other);
  };
  const Policy* partner = config.total_steps > 0 ? start_episode() : nullptr;
  Segment<1> seg;
  std::vector<double> next_values;
  while (step < config.total_steps) {
    seg.clear();
    bool terminal = false;
    while (static_cast<int>(seg.size()) < config.segment_length &&
           step < config.total_steps) {
      Encoded enc = q.encode(env->observe(seat));
      envs::JointAction a{};
      a[seat] = epsilon_greedy(q, enc, config.epsilon(step), rng);
      a[other] = partner->act(env->observe(other), partner_rng);
      envs::StepOutcome out = env->step(a);
      double r = out.reward;
      const double anneal = config.default_shaping_multiplier(step);
      if (anneal > 0.0) {
        r += anneal * (dot_events(built_in, out.game_events[0]) +
                       dot_events(built_in, out.game_events[1]));
      }
      seg.encoded.push_back({std::move(enc)});
      seg.actions.push_back({a[seat]});
      seg.rewards.push_back(r);
      ++step;
      if (out.done) {
        terminal = true;
        break;
      }
    }
    const std::size_t n = seg.size();
    next_values.assign(n, 0.0);
    for (std::size_t t = 0; t + 1 < n; ++t) {
      next_values[t] = q.max_value(seg.encoded[t + 1][0]);
    }
    if (!terminal && n > 0) {
      next_values[n - 1] = q.max_value(q.encode(env->observe(seat)));
    }
    const auto targets =
        compute_lambda_targets(seg.rewards, next_values, config.gamma, config.lambda);
    const double lr = config.learning_rate_at(step);
    for (std::size_t t = 0; t < n; ++t) {
      const double delta = targets[t] - q.value(seg.encoded[t][0], seg.actions[t][0]);
      if (!std::isfinite(delta)) diverged("best-response training", config, step);
      if (lr > 0.0) q.add(seg.encoded[t][0], seg.actions[t][0], lr * delta);
    }
    if (terminal && step < config.total_steps) partner = start_episode();
  }
  if (!q.all_finite()) diverged("best-response training", config, step);
  return Policy(std::move(q), PolicyProvenance{"best_response", config.seed, {}, ""});
}

}  // namespace tbs::learners

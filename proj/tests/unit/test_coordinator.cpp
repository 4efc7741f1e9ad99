#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "support.hpp"
#include "tbs/coordinator/coordinator.hpp"
#include "tbs/core/errors.hpp"
#include "tbs/envs/signaling.hpp"

using namespace tbs;
using namespace tbs::coordinator;

namespace {

const envs::ConceptSet& granular() {
  static const auto set =
      envs::ConceptSet::make(envs::EnvKind::kSignaling, envs::Granularity::kGranular);
  return set;
}

tom::ToMModel random_model(Rng& rng, tom::ToMScope scope, double scale) {
  tom::ToMModel m(scope, granular(), tom::FeatureSpec::for_env(envs::EnvSpec{}));
  for (auto& w : m.weights()) w = scale * standard_normal(rng);
  return m;
}

const pool::PartnerPool& small_pool() {
  static const pool::PartnerPool pool = [] {
    auto cfg = learners::TrainConfig::defaults_for(envs::EnvKind::kSignaling);
    return pool::build_pool(envs::EnvSpec{}, 3, cfg, 21, {.planted_families = 3, .workers = 3});
  }();
  return pool;
}

std::shared_ptr<TBSEnsemble> random_ensemble(int k, std::uint64_t seed) {
  Rng rng(seed);
  auto e = std::make_shared<TBSEnsemble>();
  e->seat = 1;
  for (int i = 0; i < k; ++i) {
    e->best_responses.push_back(small_pool()[i % 3].seat(1));
    e->cluster_models.push_back(random_model(rng, {false, i}, 0.5));
  }
  e->global_model = random_model(rng, {}, 0.5);
  return e;
}

std::vector<envs::Observation> random_stream(Rng& rng, int T) {
  std::vector<envs::Observation> s;
  for (int t = 0; t < T; ++t) {
    s.push_back({t % 3, uniform_int(rng, 6), uniform_int(rng, 6), uniform_int(rng, 21)});
  }
  return s;
}

// Per-step divergence of cluster i from the global model, recomputed from
// whole-history predictions.
std::vector<std::vector<double>> direct_increments(const TBSEnsemble& e,
                                                   const std::vector<envs::Observation>& s) {
  std::vector<std::vector<double>> inc;
  std::vector<envs::Observation> history;
  for (const auto& o : s) {
    history.push_back(o);
    const auto g = tom::predict_concepts(e.global_model, history);
    std::vector<double> row;
    for (const auto& m : e.cluster_models) {
      const auto p = tom::predict_concepts(m, history);
      double total = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double a = std::clamp(p[j], 1e-6, 1 - 1e-6);
        const double b = std::clamp(g[j], 1e-6, 1 - 1e-6);
        total += a * std::log(a / b) + (1 - a) * std::log((1 - a) / (1 - b));
      }
      row.push_back(total);
    }
    inc.push_back(row);
  }
  return inc;
}

std::vector<envs::JointAction> actions_of(const pool::Trajectory& t) {
  std::vector<envs::JointAction> a;
  for (const auto& s : t.steps) a.push_back(s.actions);
  return a;
}

}  // namespace

TEST_CASE("argmin with hysteresis") {
  CHECK(argmin_with_hysteresis({3, 1, 2}, 0) == 1);
  CHECK(argmin_with_hysteresis({1, 1, 2}, 1) == 1);
  CHECK(argmin_with_hysteresis({1, 1, 2}, 2) == 0);
  CHECK(argmin_with_hysteresis({2, 1, 1}, 0) == 1);
  CHECK(argmin_with_hysteresis({5}, 0) == 0);
  CHECK_THROWS(argmin_with_hysteresis({}, 0));
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + uniform_int(rng, 6);
    std::vector<double> v(k);
    for (auto& x : v) x = uniform_int(rng, 4) * uniform01(rng);
    const int current = uniform_int(rng, k);
    const double scale = 1e-3 + 1e3 * uniform01(rng);
    auto scaled = v;
    for (auto& x : scaled) x *= scale;
    CHECK(argmin_with_hysteresis(v, current) == argmin_with_hysteresis(scaled, current));
  }
}

TEST_CASE("reset draws the initial policy uniformly") {
  TBSAgent one(random_ensemble(1, 1));
  for (std::uint64_t s = 0; s < 50; ++s) {
    one.reset(s);
    CHECK(one.active_index() == 0);
  }
  TBSAgent agent(random_ensemble(3, 2));
  agent.reset(77);
  const int first = agent.active_index();
  agent.reset(77);
  CHECK(agent.active_index() == first);
  std::vector<int> counts(3, 0);
  const int N = 10000;
  for (int s = 0; s < N; ++s) {
    agent.reset(static_cast<std::uint64_t>(s));
    ++counts[agent.active_index()];
    CHECK(agent.accumulators() == std::vector<double>(3, 0.0));
  }
  const double sigma = std::sqrt(N * (1.0 / 3) * (2.0 / 3));
  for (int c : counts) CHECK(std::abs(c - N / 3.0) <= 3 * sigma);
}

TEST_CASE("identical cluster and global models accumulate nothing") {
  auto e = random_ensemble(2, 3);
  e->cluster_models[1] = e->global_model;
  TBSAgent agent(e);
  Rng rng(4);
  for (const auto& o : random_stream(rng, 48)) agent.observe_and_update(o);
  CHECK(agent.accumulators()[1] == 0.0);
  CHECK(agent.accumulators()[0] > 0.0);
}

TEST_CASE("accumulators equal a direct re-summation for every window") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto e = random_ensemble(3, 100 + trial);
    const auto stream = random_stream(rng, 48);
    const auto inc = direct_increments(*e, stream);
    for (int w : {0, 1, 2, 7, 48, 400}) {
      TBSAgent agent(e, {.window = w});
      agent.reset(trial);
      for (int t = 0; t < 48; ++t) {
        agent.observe_and_update(stream[t]);
        const int from = w == 0 ? 0 : std::max(0, t - w + 1);
        for (int i = 0; i < 3; ++i) {
          double sum = 0.0;
          for (int s = from; s <= t; ++s) sum += inc[s][i];
          CHECK(agent.accumulators()[i] == doctest::Approx(sum).epsilon(1e-10));
          if (w == 1) CHECK(agent.accumulators()[i] == agent.last_increments()[i]);
        }
      }
    }
  }
}

TEST_CASE("selection happens only at multiples of n") {
  Rng rng(6);
  for (int n : {1, 2, 5, 16, 400}) {
    const auto e = random_ensemble(3, 7 + n);
    TBSAgent agent(e, {.steps_per_selection = n, .trace = true});
    for (int episode = 0; episode < 10; ++episode) {
      agent.reset(static_cast<std::uint64_t>(episode));
      const int initial = agent.active_index();
      const auto stream = random_stream(rng, 48);
      for (int t = 0; t < 48; ++t) agent.act(stream[t], t, rng);
      const auto& log = agent.decision_log();
      REQUIRE(log.size() == 48);
      CHECK(log[0].active_index == initial);
      for (int t = 1; t < 48; ++t) {
        CHECK(log[t].timestep == t);
        if (t % n != 0) {
          CHECK(log[t].active_index == log[t - 1].active_index);
        } else {
          CHECK(log[t].active_index ==
                argmin_with_hysteresis(log[t].accumulators, log[t - 1].active_index));
        }
      }
      if (n == 400) {
        for (const auto& r : log) CHECK(r.active_index == initial);
      }
    }
  }
}

TEST_CASE("single-cluster TBS plays exactly like its best response") {
  const auto e = random_ensemble(1, 9);
  TBSAgent agent(e);
  for (int p = 0; p < 3; ++p) {
    pool::PolicyActor partner_a(small_pool()[p].seat(0), 0.2);
    const auto with_tbs = pool::rollout(partner_a, agent, envs::EnvSpec{}, 34, 55 + p, true);
    pool::PolicyActor partner_b(small_pool()[p].seat(0), 0.2);
    pool::PolicyActor br(e->best_responses[0]);
    const auto with_br = pool::rollout(partner_b, br, envs::EnvSpec{}, 34, 55 + p, true);
    CHECK(with_tbs.returns == with_br.returns);
    for (std::size_t ep = 0; ep < with_tbs.trajectories.size(); ++ep) {
      CHECK(actions_of(with_tbs.trajectories[ep]) == actions_of(with_br.trajectories[ep]));
    }
  }
}

TEST_CASE("ensembles are validated") {
  auto e = random_ensemble(2, 10);
  e->cluster_models.pop_back();
  CHECK_THROWS(TBSAgent(e));
  CHECK_THROWS(TBSAgent(std::make_shared<TBSEnsemble>()));
  e = random_ensemble(2, 10);
  e->global_model = tom::ToMModel({}, envs::ConceptSet::make(envs::EnvKind::kSignaling,
                                                            envs::Granularity::kActionBased),
                                  e->global_model.features());
  CHECK_THROWS(TBSAgent(e));
  CHECK_THROWS_AS(TBSAgent(random_ensemble(2, 10), {.window = -1}), ConfigError);
  CHECK_THROWS_AS(TBSAgent(random_ensemble(2, 10), {.steps_per_selection = 0}), ConfigError);
}

TEST_CASE("random selection picks pool members uniformly per episode") {
  const auto& pool = small_pool();
  RandomSelectionActor a(pool, 1);
  RandomSelectionActor b(pool, 1);
  std::vector<int> counts(3, 0);
  const int N = 10000;
  for (int s = 0; s < N; ++s) {
    a.begin_episode(static_cast<std::uint64_t>(s));
    b.begin_episode(static_cast<std::uint64_t>(s));
    CHECK(a.current() == b.current());
    ++counts[a.current()];
  }
  const double sigma = std::sqrt(N * (1.0 / 3) * (2.0 / 3));
  for (int c : counts) CHECK(std::abs(c - N / 3.0) <= 3 * sigma);

  // A pool of copies behaves like any one of them.
  pool::PartnerPool copies{pool.env, {pool[0], pool[0], pool[0]}};
  RandomSelectionActor r(copies, 1);
  pool::PolicyActor partner(pool[0].seat(0));
  pool::PolicyActor fixed(pool[0].seat(1));
  const auto x = pool::rollout(partner, r, pool.env, 20, 3, true);
  const auto y = pool::rollout(partner, fixed, pool.env, 20, 3, true);
  CHECK(x.returns == y.returns);
}

TEST_CASE("the oracle reproduces self-play") {
  const auto& pool = small_pool();
  for (int p = 0; p < 3; ++p) {
    pool::PolicyActor partner(pool[p].seat(0));
    auto oracle = oracle_actor(pool[p], 1);
    const auto r = pool::rollout(partner, oracle, pool.env, 20, 8, false);
    CHECK(r.mean_return == pool::rollout(pool[p].seat(0), pool[p].seat(1), pool.env, 20, 8, false).mean_return);
    CHECK(r.mean_return >= 12.0);
  }
}

TEST_CASE("decision logs are written as csv") {
  const auto path = (std::filesystem::temp_directory_path() / "tbs_decisions.csv").string();
  write_decision_log_csv(path, {{0, {0.5, 1.0}, 1, 3}, {1, {0.75, 1.5}, 0, 2}});
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() ==
        "timestep,accumulator_0,accumulator_1,active_index,action\n0,0.5,1,1,3\n1,0.75,1.5,0,2\n");
  std::filesystem::remove(path);
}

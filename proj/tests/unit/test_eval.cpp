#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "support.hpp"
#include "tbs/core/errors.hpp"
#include "tbs/eval/eval.hpp"

using namespace tbs;
using namespace tbs::eval;

namespace {

const pool::PartnerPool& planted_pool() {
  static const pool::PartnerPool pool = [] {
    auto cfg = learners::TrainConfig::defaults_for(envs::EnvKind::kSignaling);
    return pool::build_pool(envs::EnvSpec{}, 4, cfg, 31, {.planted_families = 2, .workers = 4});
  }();
  return pool;
}

CooperatorFactory oracle_method() {
  return [](const learners::PolicyPair& partner, int seat) -> std::unique_ptr<pool::Actor> {
    return std::make_unique<pool::PolicyActor>(partner.seat(seat));
  };
}

CooperatorFactory fixed_method(const learners::Policy& policy) {
  return [&policy](const learners::PolicyPair&, int) -> std::unique_ptr<pool::Actor> {
    return std::make_unique<pool::PolicyActor>(policy);
  };
}

// Standard error bound for 16-round signaling returns averaged over episodes.
double signaling_noise(int episodes) { return 4.0 * std::sqrt(16.0 / episodes); }

pool::PartnerPool uniform_kitchen_pool(int n) {
  envs::EnvSpec spec{envs::EnvKind::kKitchen};
  const auto env = envs::make_env(spec);
  pool::PartnerPool pool{spec, {}};
  for (int i = 0; i < n; ++i) {
    learners::PolicyPair pair;
    pair.seats = {learners::Policy::uniform(6, env->observation_spec()),
                  learners::Policy::uniform(6, env->observation_spec())};
    pair.provenance.seed = 1000 + i;
    pool.pairs.push_back(pair);
  }
  return pool;
}

}  // namespace

TEST_CASE("cross-play of identical and disjoint codebooks") {
  const auto& pool = planted_pool();
  const int episodes = 20;
  const double same = j_xp({pool[0], pool[0]}, pool.env, episodes, 1);
  CHECK(std::abs(same - testing::codebook_return(pool[0], pool[0])) <= signaling_noise(episodes));
  if (pool[0].selfplay_return == 16.0) CHECK(same == 16.0);
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const double oracle =
          0.5 * (testing::codebook_return(pool[a], pool[b]) + testing::codebook_return(pool[b], pool[a]));
      const double x = j_xp({pool[a], pool[b]}, pool.env, episodes, 2);
      CHECK(std::abs(x - oracle) <= signaling_noise(episodes));
      if (pool[a].provenance.family != pool[b].provenance.family) CHECK(x <= 0.0);
    }
  }
  CHECK_THROWS(j_xp({pool[0]}, pool.env, episodes, 1));
}

TEST_CASE("cross-play ignores run order") {
  const auto& pool = planted_pool();
  std::vector<learners::PolicyPair> runs{pool[0], pool[1], pool[2], pool[3]};
  const double base = j_xp(runs, pool.env, 10, 3);
  std::vector<int> order{0, 1, 2, 3};
  Rng rng(4);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<learners::PolicyPair> shuffled;
    for (int i : order) shuffled.push_back(pool[i]);
    CHECK(j_xp(shuffled, pool.env, 10, 3) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("inter-algorithm cross-play with the oracle") {
  const auto& pool = planted_pool();
  const auto r = j_inter_xp(oracle_method(), pool, {1}, 20, 5);
  REQUIRE(r.size() == 4);
  for (int p = 0; p < 4; ++p) {
    CHECK(r[p].partner == p);
    CHECK(r[p].episode_returns.size() == 20);
    CHECK(std::abs(r[p].mean_return - pool[p].selfplay_return) <= signaling_noise(20));
  }
  // Both seats: every partner's return is the mean over the two seats.
  const auto both = j_inter_xp(oracle_method(), pool, {0, 1}, 10, 5, {}, 3);
  for (const auto& x : both) CHECK(x.episode_returns.size() == 20);
  // Worker count does not change results.
  const auto serial = j_inter_xp(oracle_method(), pool, {0, 1}, 10, 5, {}, 1);
  for (int p = 0; p < 4; ++p) CHECK(serial[p].episode_returns == both[p].episode_returns);
}

TEST_CASE("inter-algorithm cross-play follows partners, not positions") {
  const auto& pool = planted_pool();
  pool::PartnerPool reversed{pool.env, {pool[3], pool[2], pool[1], pool[0]}};
  const auto method = fixed_method(pool[1].seat(1));
  const auto a = j_inter_xp(method, pool, {1}, 10, 6);
  const auto b = j_inter_xp(method, reversed, {1}, 10, 6);
  for (int p = 0; p < 4; ++p) CHECK(a[p].episode_returns == b[3 - p].episode_returns);
}

TEST_CASE("held-out partners must not share training seeds") {
  const auto& pool = planted_pool();
  CHECK_NOTHROW(check_disjoint(pool, {12345}));
  CHECK_THROWS(check_disjoint(pool, {pool[2].provenance.seed}));
  CHECK_THROWS(j_inter_xp(oracle_method(), pool, {1}, 2, 1, {pool[0].provenance.seed}));
  CHECK_THROWS(j_inter_xp(oracle_method(), pool, {}, 2, 1));
}

TEST_CASE("random cooperators score near zero on the kitchen") {
  const auto heldout = uniform_kitchen_pool(2);
  const auto r = j_inter_xp(fixed_method(heldout[0].seat(0)), heldout, {0, 1}, 10, 7, {}, 2);
  envs::Kitchen k(std::make_shared<const envs::Layout>(envs::Layout::builtin("cramped_room")));
  double scripted = 0.0;
  while (!k.done()) scripted += k.step({testing::scripted_chef(k.state(), 0), envs::kStay}).reward;
  for (const auto& x : r) CHECK(x.mean_return < 0.05 * scripted);
}

TEST_CASE("action-match frequency") {
  const auto& pool = planted_pool();
  CHECK(action_match_frequency(oracle_method(), pool, {0, 1}, 10, 8) == 1.0);

  // A uniform cooperator against a fixed oracle matches one action in six.
  const auto heldout = uniform_kitchen_pool(2);
  const auto env = envs::make_env(heldout.env);
  const auto noise = learners::Policy::uniform(6, env->observation_spec());
  const int episodes = 10;
  const double f = action_match_frequency(fixed_method(noise), heldout, {0}, episodes, 9);
  const double n = 400.0 * episodes;
  CHECK(std::abs(f - 1.0 / 6) <= 4 * std::sqrt((1.0 / 6) * (5.0 / 6) / n));
}

TEST_CASE("bootstrap confidence intervals") {
  auto [lo, hi] = bootstrap_ci(std::vector<double>(10, 3.5));
  CHECK(lo == 3.5);
  CHECK(hi == 3.5);
  CHECK_THROWS(bootstrap_ci({1.0}));
  CHECK_THROWS(bootstrap_ci({1.0, 2.0}, 1.0));
  std::vector<double> widths;
  for (int n : {100, 400, 1600}) {
    std::vector<double> s(n, 0.0);
    std::fill(s.begin() + n / 2, s.end(), 1.0);
    const auto ci = bootstrap_ci(s, 0.95, 10000, 11);
    CHECK(ci.first < 0.5);
    CHECK(ci.second > 0.5);
    CHECK(bootstrap_ci(s, 0.95, 10000, 11) == ci);
    widths.push_back(ci.second - ci.first);
    // Normal approximation of the width for a fair coin.
    CHECK(widths.back() == doctest::Approx(2 * 1.96 * 0.5 / std::sqrt(n)).epsilon(0.1));
  }
  CHECK(widths[0] / widths[1] == doctest::Approx(2.0).epsilon(0.15));
  CHECK(widths[1] / widths[2] == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("scaled returns") {
  CHECK(scaled_return(8.0, 16.0) == 0.5);
  CHECK(scaled_return(-4.0, 16.0) == 0.0);
  CHECK_FALSE(scaled_return(3.0, 0.0).has_value());

  std::vector<PartnerResult> oracle{{0, 16.0, {}}, {1, 12.0, {}}, {2, 0.0, {}}};
  std::vector<PartnerResult> method{{0, 8.0, {}}, {1, 12.0, {}}, {2, 5.0, {}}};
  std::vector<std::string> notes;
  const auto row = summarize("m", "signaling", method, &oracle, 1000, 1, &notes);
  CHECK(row.mean == doctest::Approx(25.0 / 3));
  REQUIRE(row.scaled.has_value());
  CHECK(*row.scaled == doctest::Approx(0.75));
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].find("partner 2") != std::string::npos);
  const auto self = summarize("oracle", "signaling", oracle, &oracle, 1000, 1);
  CHECK(*self.scaled == 1.0);
  CHECK(self.ci_low <= self.mean);
  CHECK(self.ci_high >= self.mean);
}

TEST_CASE("reports round-trip") {
  EvalReport r;
  r.config_hash = "abc";
  r.summary_rows.push_back({"tbs", "signaling", "window", "1", -1, 14.5, 13.0, 15.0, 0.9, 0.8});
  r.partner_rows.push_back({"tbs", "signaling", "window", "1", 0, 14.0, 12.0, 16.0, std::nullopt, std::nullopt});
  const auto back = EvalReport::from_json(r.to_json());
  CHECK(back.config_hash == "abc");
  REQUIRE(back.summary("tbs", "1") != nullptr);
  CHECK(back.summary("tbs", "1")->scaled == 0.9);
  CHECK(back.summary("tbs", "2") == nullptr);
  CHECK_FALSE(back.partner_rows[0].scaled.has_value());
  CHECK(r.to_csv() ==
        "method,layout,axis,axis_value,partner,mean,ci_low,ci_high,scaled,action_match\n"
        "tbs,signaling,window,1,all,14.5,13,15,0.9,0.8\n"
        "tbs,signaling,window,1,0,14,12,16,,\n");
  const auto dir = std::filesystem::temp_directory_path() / "tbs_eval_test";
  std::filesystem::create_directories(dir);
  r.save((dir / "r.json").string(), (dir / "r.csv").string());
  CHECK(std::filesystem::exists(dir / "r.csv"));
  std::filesystem::remove_all(dir);
}

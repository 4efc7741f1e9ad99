#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/pipeline/pipeline.hpp"

using namespace tbs;
using namespace tbs::pipeline;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  auto c = RunConfig::defaults(envs::EnvKind::kSignaling);
  c.pool.train_size = 4;
  c.pool.heldout_size = 4;
  c.pool.planted_families = 2;
  c.crossplay_episodes = 10;
  c.eval.episodes = 10;
  c.eval.bootstrap_resamples = 1000;
  c.tom.episodes_per_pairing = 20;
  c.seed = 3;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("configs round-trip and hash their content") {
  const auto c = small_config();
  const nlohmann::json j = c;
  const auto back = j.get<RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);

  auto moved = c;
  moved.artifact_dir = "/elsewhere";
  CHECK(config_hash(moved) == config_hash(c));
  auto reseeded = c;
  reseeded.seed = 4;
  CHECK(config_hash(reseeded) != config_hash(c));

  // Missing fields take the environment's defaults.
  const auto partial = nlohmann::json{{"env", {{"kind", "signaling"}}}, {"seed", 9}}.get<RunConfig>();
  CHECK(partial.seed == 9);
  CHECK(partial.pool.train_size == 10);
  CHECK(partial.coordinator.window == 0);
  CHECK(partial.coordinator.steps_per_selection == 1);
  CHECK(partial.eval.episodes == 20);
  CHECK(partial.eval.bootstrap_resamples == 10000);
  CHECK(partial.cooperator_seats() == std::vector<int>{1});
  CHECK(RunConfig::defaults(envs::EnvKind::kKitchen).cooperator_seats() == std::vector<int>{0, 1});
}

TEST_CASE("stage hashes follow their inputs") {
  const auto c = small_config();
  auto w = c;
  w.coordinator.window = 5;
  CHECK(stage_hash(w, "train-tom") == stage_hash(c, "train-tom"));
  CHECK(stage_hash(w, "evaluate") != stage_hash(c, "evaluate"));
  auto concepts = c;
  concepts.env.concepts = envs::Granularity::kActionBased;
  CHECK(stage_hash(concepts, "build-pool") == stage_hash(c, "build-pool"));
  CHECK(stage_hash(concepts, "train-tom") != stage_hash(c, "train-tom"));
  auto k = c;
  k.cluster.k_fixed = 2;
  CHECK(stage_hash(k, "crossplay") == stage_hash(c, "crossplay"));
  CHECK(stage_hash(k, "cluster") != stage_hash(c, "cluster"));
  CHECK_THROWS(stage_hash(c, "nope"));
}

TEST_CASE("invalid configs are rejected") {
  auto c = small_config();
  c.cluster.k_fixed = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.eval.methods = {"tbs", "magic"};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.coordinator.steps_per_selection = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  TempDir dir("tbs_pipeline_bad_config");
  write_file_atomic((dir.path / "c.json").string(), "{\"pool\": {\"train_size\": \"many\"}}");
  CHECK_THROWS_AS(load_config((dir.path / "c.json").string()), ConfigError);
}

TEST_CASE("ablation axes edit the config") {
  const auto c = small_config();
  CHECK(apply_axis(c, "pool_size", "8").pool.train_size == 8);
  CHECK(apply_axis(c, "k_fixed", "2").cluster.k_fixed == 2);
  CHECK(apply_axis(c, "window", "400").coordinator.window == 400);
  CHECK(apply_axis(c, "steps_per_selection", "7").coordinator.steps_per_selection == 7);
  CHECK(apply_axis(c, "concept_set", "action_based").env.concepts == envs::Granularity::kActionBased);
  CHECK_THROWS(apply_axis(c, "colour", "red"));
  CHECK_THROWS(apply_axis(c, "window", "wide"));
}

TEST_CASE("the pipeline runs end to end and reruns identically") {
  TempDir dir("tbs_pipeline_e2e");
  PipelineOptions opt;
  opt.out_dir = dir.path.string();
  opt.workers = 4;
  const auto start = std::chrono::steady_clock::now();
  Pipeline p(small_config(), opt);
  const auto report = p.evaluate();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 600.0);

  for (const auto& m : {"tbs", "single_br", "random_selection", "oracle"}) {
    REQUIRE(report->summary(m) != nullptr);
    CHECK(report->summary(m)->ci_low <= report->summary(m)->mean);
    CHECK(report->summary(m)->ci_high >= report->summary(m)->mean);
  }
  CHECK(report->summary("oracle")->scaled == doctest::Approx(1.0));
  CHECK(report->summary("oracle")->mean >= report->summary("tbs")->mean);
  CHECK(report->summary("tbs")->action_match >= report->summary("random_selection")->action_match);
  CHECK(report->partner_rows.size() == 16);
  CHECK(report->config_hash == config_hash(small_config()));
  for (const auto& stage : stage_names()) {
    CHECK(fs::exists(fs::path(p.stage_dir(stage)) / "stage.json"));
  }
  CHECK(fs::exists(fs::path(p.stage_dir("evaluate")) / "report.csv"));
  CHECK(fs::exists(fs::path(p.stage_dir("cluster")) / "clusters.json"));

  // Rerunning any stage with the same config rewrites the same bytes.
  const auto before = snapshot(dir.path);
  for (const auto& stage : stage_names()) {
    Pipeline again(small_config(), opt);
    again.set_compute_upstream(false);
    again.run_stage(stage);
  }
  CHECK(snapshot(dir.path) == before);

  // A fresh pipeline reuses every artifact from disk.
  Pipeline reload(small_config(), opt);
  reload.set_compute_upstream(false);
  CHECK(reload.evaluate()->to_json() == report->to_json());
  CHECK(reload.clusters()->labels == p.clusters()->labels);
}

TEST_CASE("missing upstream artifacts name the stage") {
  TempDir dir("tbs_pipeline_missing");
  PipelineOptions opt;
  opt.out_dir = dir.path.string();
  Pipeline p(small_config(), opt);
  p.set_compute_upstream(false);
  try {
    p.run_stage("cluster");
    FAIL("expected an artifact error");
  } catch (const ArtifactError& e) {
    CHECK(e.stage() == "crossplay");
    CHECK(std::string(e.what()).find("tbs crossplay") != std::string::npos);
  }
}

TEST_CASE("changing the master seed changes the pool") {
  TempDir dir("tbs_pipeline_seed");
  PipelineOptions opt;
  opt.out_dir = dir.path.string();
  opt.workers = 4;
  auto a = small_config();
  auto b = small_config();
  b.seed = 4;
  Pipeline pa(a, opt);
  Pipeline pb(b, opt);
  pa.run_stage("build-pool");
  pb.run_stage("build-pool");
  CHECK(pa.stage_dir("build-pool") != pb.stage_dir("build-pool"));
  const auto ma = read_json((fs::path(pa.stage_dir("build-pool")) / "train" / "manifest.json").string());
  const auto mb = read_json((fs::path(pb.stage_dir("build-pool")) / "train" / "manifest.json").string());
  CHECK(hash_json(ma) != hash_json(mb));
}

TEST_CASE("ablations share seeds across grid points") {
  TempDir dir("tbs_pipeline_ablate");
  PipelineOptions opt;
  opt.out_dir = dir.path.string();
  opt.workers = 4;
  auto base = small_config();
  base.eval.methods = {"tbs", "oracle"};
  const auto single = run_ablation("window", {"5"}, base, opt);
  Pipeline p(apply_axis(base, "window", "5"), opt);
  const auto direct = p.evaluate();
  REQUIRE(single.summary("tbs", "5") != nullptr);
  CHECK(single.summary("tbs", "5")->mean == direct->summary("tbs")->mean);
  CHECK(single.summary("tbs", "5")->axis == "window");

  const auto sweep = run_ablation("window", {"1", "400"}, base, opt);
  // Upstream of the coordinator is shared, so the oracle rows are identical.
  CHECK(sweep.summary("oracle", "1")->mean == sweep.summary("oracle", "400")->mean);
  Pipeline p1(apply_axis(base, "window", "1"), opt);
  Pipeline p400(apply_axis(base, "window", "400"), opt);
  CHECK(p1.stage_dir("train-tom") == p400.stage_dir("train-tom"));
  CHECK(p1.stage_dir("evaluate") != p400.stage_dir("evaluate"));
}

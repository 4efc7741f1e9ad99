#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/core/parallel.hpp"
#include "tbs/pipeline/pipeline.hpp"

using namespace tbs;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = default_workers();
  std::string out;
  bool trace = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Run configuration (JSON)");
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Artifact directory (overrides the config)");
  cmd->add_flag("--trace", c.trace, "Write per-episode TBS decision logs");
}

pipeline::RunConfig resolve(const Common& c) {
  auto config = c.config_path.empty()
                    ? pipeline::RunConfig::defaults(envs::EnvKind::kSignaling)
                    : pipeline::load_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  if (!c.out.empty()) config.artifact_dir = c.out;
  config.validate();
  return config;
}

pipeline::PipelineOptions options_for(const Common& c, const pipeline::RunConfig& config) {
  pipeline::PipelineOptions o;
  o.out_dir = config.artifact_dir;
  o.workers = c.workers;
  o.trace = c.trace;
  return o;
}

void print_summary(const eval::EvalReport& r) {
  std::printf("%-18s %-10s %10s %10s %10s %8s %8s\n", "method", "axis", "mean", "ci_low",
              "ci_high", "scaled", "match");
  for (const auto& row : r.summary_rows) {
    std::printf("%-18s %-10s %10.3f %10.3f %10.3f %8s %8s\n", row.method.c_str(),
                row.axis_value.c_str(), row.mean, row.ci_low, row.ci_high,
                row.scaled ? std::to_string(*row.scaled).substr(0, 6).c_str() : "-",
                row.action_match ? std::to_string(*row.action_match).substr(0, 6).c_str()
                                 : "-");
  }
  for (const auto& n : r.notes) std::printf("note: %s\n", n.c_str());
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ToM-based best response selection for zero-shot coordination"};
  app.require_subcommand(1);
  Common common;
  std::string stage_name;
  std::string methods;
  std::string axis;
  std::string grid;

  for (const auto& stage : pipeline::stage_names()) {
    auto* cmd = app.add_subcommand(stage, "Run the " + stage + " stage");
    add_common(cmd, common);
    if (stage == "evaluate") {
      cmd->add_option("--methods", methods,
                      "Comma-separated methods (tbs,single_br,random_selection,oracle)");
    }
    cmd->callback([&, stage] { stage_name = stage; });
  }
  auto* ablate = app.add_subcommand("ablate", "Evaluate TBS across an ablation grid");
  add_common(ablate, common);
  ablate->add_option("--axis", axis, "pool_size, k_fixed, window, steps_per_selection or concept_set")
      ->required();
  ablate->add_option("--grid", grid, "Comma-separated axis values")->required();
  ablate->callback([&] { stage_name = "ablate"; });
  auto* all = app.add_subcommand("run-all", "Run every stage, reusing valid artifacts");
  add_common(all, common);
  all->callback([&] { stage_name = "run-all"; });

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = resolve(common);
    if (!methods.empty()) {
      config.eval.methods = split(methods);
      config.validate();
    }
    const auto options = options_for(common, config);
    if (stage_name == "ablate") {
      const auto report = pipeline::run_ablation(axis, split(grid), config, options);
      const std::string dir = options.out_dir + "/ablate-" + axis + "-" +
                              pipeline::hash_json({{"config", pipeline::config_hash(config)},
                                         {"axis", axis},
                                         {"grid", split(grid)}});
      report.save(dir + "/report.json", dir + "/report.csv");
      print_summary(report);
      std::printf("wrote %s\n", dir.c_str());
      return 0;
    }
    pipeline::Pipeline p(config, options);
    if (stage_name == "run-all") {
      for (const auto& s : pipeline::stage_names()) {
        stage_name = s;
        p.ensure_stage(s);
        if (s == "evaluate") print_summary(*p.evaluate());
        std::printf("%s: %s\n", s.c_str(), p.stage_dir(s).c_str());
      }
      return 0;
    }
    p.set_compute_upstream(false);
    p.run_stage(stage_name);
    if (stage_name == "evaluate") print_summary(*p.evaluate());
    std::printf("%s: %s\n", stage_name.c_str(), p.stage_dir(stage_name).c_str());
    return 0;
  } catch (const ArtifactError& e) {
    std::cerr << "error in stage '" << stage_name << "': " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error in stage '" << stage_name << "': configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error in stage '" << stage_name << "': " << e.what() << "\n";
    return 1;
  }
}

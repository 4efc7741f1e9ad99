#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tbs/cluster/cluster.hpp"
#include "tbs/core/errors.hpp"
#include "tbs/core/parallel.hpp"
#include "tbs/learners/lambda_targets.hpp"
#include "tbs/pipeline/pipeline.hpp"
#include "tbs/tom/tom.hpp"

namespace py = pybind11;
using namespace tbs;

namespace {

pipeline::RunConfig parse_config(const std::string& text) {
  try {
    auto c = nlohmann::json::parse(text).get<pipeline::RunConfig>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

pipeline::PipelineOptions make_options(const pipeline::RunConfig& c, const std::string& out_dir,
                                       int workers, bool trace) {
  pipeline::PipelineOptions o;
  o.out_dir = out_dir.empty() ? c.artifact_dir : out_dir;
  o.workers = workers > 0 ? workers : default_workers();
  o.trace = trace;
  return o;
}

class PyEnv {
 public:
  PyEnv(const std::string& kind, const std::string& concepts, const std::string& layout,
        int horizon) {
    spec_.kind = envs::parse_env_kind(kind);
    spec_.concepts = envs::parse_granularity(concepts);
    if (!layout.empty()) spec_.layout = layout;
    if (horizon > 0) spec_.horizon = horizon;
    env_ = envs::make_env(spec_);
  }
  void reset(std::uint64_t seed) { env_->reset(seed); }
  py::dict step(int a0, int a1) {
    const auto out = env_->step({a0, a1});
    py::dict d;
    d["reward"] = out.reward;
    d["done"] = out.done;
    d["interactions"] = std::vector<std::vector<int>>{
        {out.interactions[0].begin(), out.interactions[0].end()},
        {out.interactions[1].begin(), out.interactions[1].end()}};
    return d;
  }
  envs::Observation observe(int agent) const { return env_->observe(agent); }
  int num_actions(int agent) const { return env_->num_actions(agent); }
  bool is_acting(int agent) const { return env_->is_acting(agent); }
  int timestep() const { return env_->timestep(); }
  int horizon() const { return env_->horizon(); }
  bool done() const { return env_->done(); }
  std::vector<std::string> concept_names() const { return env_->concepts().names(); }
  std::string id() const { return spec_.id(); }

 private:
  envs::EnvSpec spec_;
  std::unique_ptr<envs::Environment> env_;
};

py::dict assignment_dict(const cluster::ClusterAssignment& a) {
  py::dict d;
  d["k"] = a.k;
  d["labels"] = a.labels;
  d["cost_curve"] = a.cost_curve;
  d["eigenvalues"] = a.eigenvalues;
  d["rotation"] = a.rotation;
  d["converged"] = a.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Theory-of-Mind-based best response selection for zero-shot coordination";

  static py::exception<Error> base(m, "TbsError");
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<ArtifactError> artifact_error(m, "ArtifactError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const ArtifactError& e) {
      py::set_error(artifact_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, const std::string&, const std::string&, int>(),
           py::arg("kind") = "signaling", py::arg("concepts") = "granular",
           py::arg("layout") = "", py::arg("horizon") = 0)
      .def("reset", &PyEnv::reset, py::arg("seed") = 0)
      .def("step", &PyEnv::step, py::arg("a0"), py::arg("a1"))
      .def("observe", &PyEnv::observe, py::arg("agent"))
      .def("num_actions", &PyEnv::num_actions, py::arg("agent"))
      .def("is_acting", &PyEnv::is_acting, py::arg("agent"))
      .def_property_readonly("timestep", &PyEnv::timestep)
      .def_property_readonly("horizon", &PyEnv::horizon)
      .def_property_readonly("done", &PyEnv::done)
      .def_property_readonly("concept_names", &PyEnv::concept_names)
      .def_property_readonly("id", &PyEnv::id);

  m.def("similarity_matrix",
        [](const cluster::Matrix& X) { return cluster::similarity_matrix(X).S; },
        py::arg("crossplay"));
  m.def("select_k",
        [](const cluster::Matrix& S, int k_min, int k_max, std::uint64_t seed) {
          cluster::SelectOptions o;
          o.rotation.seed = seed;
          return assignment_dict(cluster::select_k(S, k_min, k_max, o));
        },
        py::arg("similarity"), py::arg("k_min"), py::arg("k_max"), py::arg("seed") = 0);
  m.def("spectral_clustering",
        [](const cluster::Matrix& S, int k, std::uint64_t seed) {
          return assignment_dict(cluster::spectral_clustering(S, k, seed));
        },
        py::arg("similarity"), py::arg("k"), py::arg("seed") = 0);
  m.def("alignment_cost", &cluster::alignment_cost, py::arg("embedding"), py::arg("rotation"));
  m.def("kl_bernoulli", &tom::kl_bernoulli, py::arg("p"), py::arg("q"));
  m.def("lambda_targets",
        [](const std::vector<double>& rewards, const std::vector<double>& next_values,
           double gamma, double lambda) {
          return learners::compute_lambda_targets(rewards, next_values, gamma, lambda);
        },
        py::arg("rewards"), py::arg("next_values"), py::arg("gamma"), py::arg("lam"));

  m.def("default_config",
        [](const std::string& env) {
          return nlohmann::json(pipeline::RunConfig::defaults(envs::parse_env_kind(env))).dump();
        },
        py::arg("env") = "signaling");
  m.def("config_hash",
        [](const std::string& config) { return pipeline::config_hash(parse_config(config)); },
        py::arg("config"));
  m.def("stage_names", &pipeline::stage_names);
  m.def("run_stage",
        [](const std::string& config, const std::string& stage, const std::string& out_dir,
           int workers, bool compute_upstream) {
          const auto c = parse_config(config);
          py::gil_scoped_release release;
          pipeline::Pipeline p(c, make_options(c, out_dir, workers, false));
          p.set_compute_upstream(compute_upstream);
          p.run_stage(stage);
          return p.stage_dir(stage);
        },
        py::arg("config"), py::arg("stage"), py::arg("out_dir") = "", py::arg("workers") = 0,
        py::arg("compute_upstream") = true);
  m.def("evaluate",
        [](const std::string& config, const std::string& out_dir, int workers, bool trace) {
          const auto c = parse_config(config);
          py::gil_scoped_release release;
          pipeline::Pipeline p(c, make_options(c, out_dir, workers, trace));
          return p.evaluate()->to_json().dump();
        },
        py::arg("config"), py::arg("out_dir") = "", py::arg("workers") = 0,
        py::arg("trace") = false);
  m.def("ablate",
        [](const std::string& config, const std::string& axis,
           const std::vector<std::string>& grid, const std::string& out_dir, int workers) {
          const auto c = parse_config(config);
          py::gil_scoped_release release;
          return pipeline::run_ablation(axis, grid, c, make_options(c, out_dir, workers, false))
              .to_json()
              .dump();
        },
        py::arg("config"), py::arg("axis"), py::arg("grid"), py::arg("out_dir") = "",
        py::arg("workers") = 0);
}

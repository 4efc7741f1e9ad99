#pragma once

#include <any>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "tbs/cluster/cluster.hpp"
#include "tbs/coordinator/coordinator.hpp"
#include "tbs/eval/eval.hpp"
#include "tbs/pipeline/config.hpp"

namespace tbs::pipeline {

struct Pools {
  pool::PartnerPool train;
  pool::PartnerPool heldout;
};

struct CrossPlay {
  cluster::CrossPlayMatrix xp;
  cluster::SimilarityMatrix similarity;
};

// Best responses for one cooperator seat.
struct SeatBestResponses {
  int seat = 1;
  std::vector<learners::Policy> cluster_brs;  // one per cluster
  learners::Policy single;                    // trained on the whole pool
};

struct SeatToM {
  int seat = 1;
  std::vector<tom::ToMModel> cluster_models;
  tom::ToMModel global_model;
};

// In-memory stage results shared between pipelines, keyed by stage hash.
class StageCache {
 public:
  template <class T>
  std::shared_ptr<const T> get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = items_.find(key);
    if (it == items_.end()) return nullptr;
    return std::any_cast<std::shared_ptr<const T>>(it->second);
  }
  template <class T>
  void put(const std::string& key, std::shared_ptr<const T> value) {
    std::lock_guard lock(mu_);
    items_[key] = std::move(value);
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::any> items_;
};

struct PipelineOptions {
  std::string out_dir;  // empty = keep everything in memory
  int workers = 1;
  bool trace = false;
  std::shared_ptr<StageCache> cache;
};

// Staged TBS pipeline. Each accessor returns the stage result, taking it from
// the in-memory cache, then the artifact directory, then (if allowed)
// computing it. Stage artifacts live in out_dir/<stage>-<stage hash>/.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config, PipelineOptions options = {});

  const RunConfig& config() const { return config_; }
  const PipelineOptions& options() const { return options_; }
  std::string stage_dir(const std::string& stage) const;

  // When false, missing upstream artifacts raise ArtifactError instead of
  // being computed.
  void set_compute_upstream(bool allow) { compute_upstream_ = allow; }

  std::shared_ptr<const Pools> pools();
  std::shared_ptr<const CrossPlay> crossplay();
  std::shared_ptr<const cluster::ClusterAssignment> clusters();
  std::shared_ptr<const std::vector<SeatBestResponses>> best_responses();
  std::shared_ptr<const std::vector<SeatToM>> tom_models();
  std::shared_ptr<const eval::EvalReport> evaluate();

  // Recomputes one stage (upstream taken per set_compute_upstream) and
  // writes its artifact.
  void run_stage(const std::string& stage);
  // Makes one stage available, reusing a valid artifact when present.
  void ensure_stage(const std::string& stage);

  std::shared_ptr<const coordinator::TBSEnsemble> ensemble(int seat);
  eval::CooperatorFactory method(const std::string& name);

 private:
  template <class T, class Compute, class Load, class Save>
  std::shared_ptr<const T> stage(const std::string& name, Compute compute, Load load,
                                 Save save, bool force = false);

  RunConfig config_;
  PipelineOptions options_;
  bool compute_upstream_ = true;
  std::string forced_;
};

// One pipeline evaluation per grid value of `axis` (pool_size, k_fixed,
// window, steps_per_selection, concept_set), all with the base config's
// seeds. Rows carry the axis and its value.
eval::EvalReport run_ablation(const std::string& axis,
                              const std::vector<std::string>& grid,
                              const RunConfig& base, const PipelineOptions& options);

RunConfig apply_axis(const RunConfig& base, const std::string& axis,
                     const std::string& value);

}  // namespace tbs::pipeline

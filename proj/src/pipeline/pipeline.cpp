#include "tbs/pipeline/pipeline.hpp"

#include <filesystem>

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/core/parallel.hpp"

namespace tbs::pipeline {

namespace fs = std::filesystem;

Pipeline::Pipeline(RunConfig config, PipelineOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  if (!options_.cache) options_.cache = std::make_shared<StageCache>();
  if (options_.workers < 1) options_.workers = 1;
}

std::string Pipeline::stage_dir(const std::string& stage) const {
  return (fs::path(options_.out_dir) / (stage + "-" + stage_hash(config_, stage))).string();
}

namespace {

std::string stamp_path(const std::string& dir) { return (fs::path(dir) / "stage.json").string(); }

// Every stage directory carries a stamp written last; a directory without a
// matching stamp is treated as absent.
bool stamped(const std::string& dir, const std::string& hash) {
  if (!fs::exists(stamp_path(dir))) return false;
  try {
    return read_json(stamp_path(dir)).value("stage_hash", "") == hash;
  } catch (const Error&) {
    return false;
  }
}

void write_stamp(const std::string& dir, const std::string& stage, const std::string& hash,
                 const RunConfig& config) {
  write_json_atomic(stamp_path(dir), {{"stage", stage},
                                      {"stage_hash", hash},
                                      {"config_hash", config_hash(config)},
                                      {"config", config}});
}

}  // namespace

template <class T, class Compute, class Load, class Save>
std::shared_ptr<const T> Pipeline::stage(const std::string& name, Compute compute, Load load,
                                         Save save, bool force) {
  const std::string hash = stage_hash(config_, name);
  if (!force) {
    if (auto hit = options_.cache->get<T>(hash)) return hit;
  }
  const bool persist = !options_.out_dir.empty();
  const std::string dir = persist ? stage_dir(name) : std::string();
  if (!force && persist && stamped(dir, hash)) {
    auto value = std::make_shared<const T>(load(dir));
    options_.cache->put<T>(hash, value);
    return value;
  }
  if (!force && !compute_upstream_) {
    throw ArtifactError(name, "missing or stale artifact for stage '" + name +
                                  "'; run `tbs " + name + "` with this config first");
  }
  auto value = std::make_shared<const T>(compute());
  if (persist) {
    fs::create_directories(dir);
    save(*value, dir);
    write_stamp(dir, name, hash, config_);
  }
  options_.cache->put<T>(hash, value);
  return value;
}

std::shared_ptr<const Pools> Pipeline::pools() {
  const std::string h = config_hash(config_);
  return stage<Pools>(
      "build-pool",
      [&] {
        pool::PoolOptions opt;
        opt.planted_families = config_.pool.planted_families;
        opt.planted_bonus = config_.pool.planted_bonus;
        opt.workers = options_.workers;
        Pools p;
        p.train = pool::build_pool(config_.env, config_.pool.train_size, config_.pool.train,
                                   config_.seed, opt);
        p.heldout = pool::build_heldout_pool(config_.env, config_.pool.heldout_size,
                                             config_.pool.train, config_.seed, opt);
        return p;
      },
      [&](const std::string& dir) {
        Pools p;
        p.train = pool::load_pool((fs::path(dir) / "train").string());
        p.heldout = pool::load_pool((fs::path(dir) / "heldout").string());
        // The stored env spec carries the granularity of the run that built
        // it; downstream stages use this run's concept set.
        p.train.env = config_.env;
        p.heldout.env = config_.env;
        return p;
      },
      [&](const Pools& p, const std::string& dir) {
        pool::save_pool(p.train, (fs::path(dir) / "train").string(), h);
        pool::save_pool(p.heldout, (fs::path(dir) / "heldout").string(), h);
      },
      forced_ == "build-pool");
}

std::shared_ptr<const CrossPlay> Pipeline::crossplay() {
  return stage<CrossPlay>(
      "crossplay",
      [&] {
        auto p = pools();
        CrossPlay c;
        c.xp = cluster::crossplay_matrix(p->train, config_.crossplay_episodes,
                                         derive_seed(config_.seed, "crossplay"),
                                         options_.workers);
        c.similarity = cluster::similarity_matrix(c.xp);
        return c;
      },
      [&](const std::string& dir) {
        CrossPlay c;
        c.xp.X = cluster::read_matrix_csv((fs::path(dir) / "crossplay.csv").string());
        c.xp.episodes = config_.crossplay_episodes;
        c.xp.seed = derive_seed(config_.seed, "crossplay");
        c.similarity.S = cluster::read_matrix_csv((fs::path(dir) / "similarity.csv").string());
        return c;
      },
      [&](const CrossPlay& c, const std::string& dir) {
        cluster::write_matrix_csv((fs::path(dir) / "crossplay.csv").string(), c.xp.X);
        cluster::write_matrix_csv((fs::path(dir) / "similarity.csv").string(), c.similarity.S);
      },
      forced_ == "crossplay");
}

std::shared_ptr<const cluster::ClusterAssignment> Pipeline::clusters() {
  return stage<cluster::ClusterAssignment>(
      "cluster",
      [&] {
        auto c = crossplay();
        const int n = static_cast<int>(c->similarity.S.rows());
        if (config_.cluster.k_fixed > 0) {
          return cluster::spectral_clustering(c->similarity.S, config_.cluster.k_fixed,
                                              derive_seed(config_.seed, "cluster"));
        }
        auto [lo, hi] = cluster::default_k_range(n);
        if (config_.cluster.k_min > 0) lo = config_.cluster.k_min;
        if (config_.cluster.k_max > 0) hi = std::min(config_.cluster.k_max, n);
        cluster::SelectOptions opt;
        opt.tie_tolerance = config_.cluster.tie_tolerance;
        opt.rotation.restarts = config_.cluster.restarts;
        opt.rotation.iterations = config_.cluster.iterations;
        opt.rotation.learning_rate = config_.cluster.learning_rate;
        opt.rotation.seed = derive_seed(config_.seed, "cluster");
        return cluster::select_k(c->similarity.S, lo, hi, opt);
      },
      [&](const std::string& dir) {
        return cluster::assignment_from_json(
            read_json((fs::path(dir) / "clusters.json").string()));
      },
      [&](const cluster::ClusterAssignment& a, const std::string& dir) {
        auto j = cluster::to_json(a);
        j["config_hash"] = config_hash(config_);
        write_json_atomic((fs::path(dir) / "clusters.json").string(), j);
      },
      forced_ == "cluster");
}

std::shared_ptr<const std::vector<SeatBestResponses>> Pipeline::best_responses() {
  const auto seats = config_.cooperator_seats();
  return stage<std::vector<SeatBestResponses>>(
      "train-br",
      [&] {
        auto p = pools();
        auto a = clusters();
        const auto groups = cluster::members(*a);
        std::vector<SeatBestResponses> out(seats.size());
        // Jobs: per seat, k cluster BRs and one single BR.
        const std::size_t per_seat = groups.size() + 1;
        std::vector<learners::Policy> trained(seats.size() * per_seat);
        parallel_for(trained.size(), options_.workers, [&](std::size_t job) {
          const int seat = seats[job / per_seat];
          const std::size_t i = job % per_seat;
          std::vector<learners::PolicyPair> partners;
          if (i < groups.size()) {
            for (int m : groups[i]) partners.push_back(p->train[m]);
          } else {
            partners = p->train.pairs;
          }
          learners::TrainConfig c = config_.best_response;
          c.seed = derive_seed(config_.seed, i < groups.size() ? "br-cluster" : "br-single",
                               static_cast<std::uint64_t>(seat) * 1000 + i);
          trained[job] = learners::train_best_response(config_.env, partners, seat, c);
        });
        for (std::size_t s = 0; s < seats.size(); ++s) {
          out[s].seat = seats[s];
          for (std::size_t i = 0; i < groups.size(); ++i) {
            out[s].cluster_brs.push_back(trained[s * per_seat + i]);
          }
          out[s].single = trained[s * per_seat + groups.size()];
        }
        return out;
      },
      [&](const std::string& dir) {
        const auto index = read_json((fs::path(dir) / "index.json").string());
        std::vector<SeatBestResponses> out;
        for (const auto& e : index.at("seats")) {
          SeatBestResponses s;
          s.seat = e.at("seat").get<int>();
          for (const auto& f : e.at("cluster_brs")) {
            s.cluster_brs.push_back(learners::Policy::load((fs::path(dir) / f.get<std::string>()).string()));
          }
          s.single = learners::Policy::load((fs::path(dir) / e.at("single").get<std::string>()).string());
          out.push_back(std::move(s));
        }
        return out;
      },
      [&](const std::vector<SeatBestResponses>& brs, const std::string& dir) {
        nlohmann::json seats_json = nlohmann::json::array();
        for (const auto& s : brs) {
          const std::string prefix = "seat" + std::to_string(s.seat + 1);
          std::vector<std::string> files;
          for (std::size_t i = 0; i < s.cluster_brs.size(); ++i) {
            files.push_back(prefix + "_cluster_" + std::to_string(i) + ".json");
            s.cluster_brs[i].save((fs::path(dir) / files.back()).string());
          }
          const std::string single = prefix + "_single.json";
          s.single.save((fs::path(dir) / single).string());
          seats_json.push_back({{"seat", s.seat}, {"cluster_brs", files}, {"single", single}});
        }
        write_json_atomic((fs::path(dir) / "index.json").string(),
                          {{"config_hash", config_hash(config_)}, {"seats", seats_json}});
      },
      forced_ == "train-br");
}

std::shared_ptr<const std::vector<SeatToM>> Pipeline::tom_models() {
  return stage<std::vector<SeatToM>>(
      "train-tom",
      [&] {
        auto p = pools();
        auto a = clusters();
        auto brs = best_responses();
        const auto groups = cluster::members(*a);
        const int k = static_cast<int>(groups.size());
        const auto& hp = config_.tom;
        std::vector<SeatToM> out(brs->size());
        // Jobs: per seat, k cluster models and one global model.
        const std::size_t per_seat = groups.size() + 1;
        std::vector<tom::ToMModel> trained(brs->size() * per_seat);
        parallel_for(trained.size(), options_.workers, [&](std::size_t job) {
          const auto& seat_brs = (*brs)[job / per_seat];
          const int seat = seat_brs.seat;
          const int i = static_cast<int>(job % per_seat);
          const std::uint64_t s = derive_seed(config_.seed, "tom",
                                              static_cast<std::uint64_t>(seat) * 1000 + i);
          std::vector<pool::Trajectory> trajs;
          if (i < k) {
            trajs = tom::generate_trajectories(p->train, groups[i], seat_brs.cluster_brs[i],
                                               1 - seat, hp.episodes_per_pairing,
                                               hp.partner_noise, s);
          } else {
            // Global: every cluster's partners with every cluster's BR, the
            // per-partner episode budget split across the BRs.
            const int per_br = std::max(1, hp.episodes_per_pairing / k);
            for (int c = 0; c < k; ++c) {
              for (int b = 0; b < k; ++b) {
                auto t = tom::generate_trajectories(
                    p->train, groups[c], seat_brs.cluster_brs[b], 1 - seat, per_br,
                    hp.partner_noise, derive_seed(s, "pairing", c * k + b));
                for (auto& x : t) trajs.push_back(std::move(x));
              }
            }
          }
          const auto data = tom::make_dataset(trajs, config_.env, seat);
          if (data.samples() == 0) {
            throw Error("empty ToM dataset for cluster " + std::to_string(i));
          }
          trained[job] = tom::train_tom(data, i < k ? tom::ToMScope{false, i} : tom::ToMScope{true, -1}, hp);
        });
        for (std::size_t s = 0; s < brs->size(); ++s) {
          out[s].seat = (*brs)[s].seat;
          for (int i = 0; i < k; ++i) out[s].cluster_models.push_back(trained[s * per_seat + i]);
          out[s].global_model = trained[s * per_seat + k];
        }
        return out;
      },
      [&](const std::string& dir) {
        const auto index = read_json((fs::path(dir) / "index.json").string());
        std::vector<SeatToM> out;
        for (const auto& e : index.at("seats")) {
          SeatToM s;
          s.seat = e.at("seat").get<int>();
          for (const auto& f : e.at("cluster_models")) {
            s.cluster_models.push_back(tom::ToMModel::load((fs::path(dir) / f.get<std::string>()).string()));
          }
          s.global_model = tom::ToMModel::load((fs::path(dir) / e.at("global").get<std::string>()).string());
          out.push_back(std::move(s));
        }
        return out;
      },
      [&](const std::vector<SeatToM>& models, const std::string& dir) {
        nlohmann::json seats_json = nlohmann::json::array();
        for (const auto& s : models) {
          const std::string prefix = "seat" + std::to_string(s.seat + 1);
          std::vector<std::string> files;
          for (std::size_t i = 0; i < s.cluster_models.size(); ++i) {
            files.push_back(prefix + "_cluster_" + std::to_string(i) + ".json");
            s.cluster_models[i].save((fs::path(dir) / files.back()).string());
          }
          const std::string global = prefix + "_global.json";
          s.global_model.save((fs::path(dir) / global).string());
          seats_json.push_back({{"seat", s.seat}, {"cluster_models", files}, {"global", global}});
        }
        write_json_atomic((fs::path(dir) / "index.json").string(),
                          {{"config_hash", config_hash(config_)}, {"seats", seats_json}});
      },
      forced_ == "train-tom");
}

std::shared_ptr<const coordinator::TBSEnsemble> Pipeline::ensemble(int seat) {
  auto brs = best_responses();
  auto models = tom_models();
  for (std::size_t s = 0; s < brs->size(); ++s) {
    if ((*brs)[s].seat != seat) continue;
    auto e = std::make_shared<coordinator::TBSEnsemble>();
    e->seat = seat;
    e->best_responses = (*brs)[s].cluster_brs;
    e->cluster_models = (*models)[s].cluster_models;
    e->global_model = (*models)[s].global_model;
    e->validate();
    return e;
  }
  throw Error("no best responses for seat " + std::to_string(seat + 1));
}

eval::CooperatorFactory Pipeline::method(const std::string& name) {
  if (name == "oracle") {
    return [](const learners::PolicyPair& partner, int seat) -> std::unique_ptr<pool::Actor> {
      return std::make_unique<pool::PolicyActor>(partner.seat(seat));
    };
  }
  if (name == "random_selection") {
    auto p = pools();
    return [p](const learners::PolicyPair&, int seat) -> std::unique_ptr<pool::Actor> {
      return std::make_unique<coordinator::RandomSelectionActor>(p->train, seat);
    };
  }
  if (name == "single_br") {
    auto brs = best_responses();
    return [brs](const learners::PolicyPair&, int seat) -> std::unique_ptr<pool::Actor> {
      for (const auto& s : *brs) {
        if (s.seat == seat) return std::make_unique<pool::PolicyActor>(s.single);
      }
      throw Error("no single best response for seat " + std::to_string(seat + 1));
    };
  }
  if (name == "tbs") {
    std::map<int, std::shared_ptr<const coordinator::TBSEnsemble>> ensembles;
    for (int seat : config_.cooperator_seats()) ensembles[seat] = ensemble(seat);
    coordinator::TBSOptions opt;
    opt.window = config_.coordinator.window;
    opt.steps_per_selection = config_.coordinator.steps_per_selection;
    return [ensembles, opt](const learners::PolicyPair&, int seat) -> std::unique_ptr<pool::Actor> {
      return std::make_unique<coordinator::TBSAgent>(ensembles.at(seat), opt);
    };
  }
  throw ConfigError("unknown method '" + name + "'");
}

std::shared_ptr<const eval::EvalReport> Pipeline::evaluate() {
  return stage<eval::EvalReport>(
      "evaluate",
      [&] {
        auto p = pools();
        const auto seats = config_.cooperator_seats();
        const std::uint64_t seed = derive_seed(config_.seed, "eval");
        const auto training_seeds = p->train.seeds();
        const std::string layout = config_.env.id();
        eval::EvalReport report;
        report.config_hash = config_hash(config_);
        const auto oracle = eval::j_inter_xp(method("oracle"), p->heldout, seats,
                                             config_.eval.episodes, seed, training_seeds,
                                             options_.workers);
        for (const auto& name : config_.eval.methods) {
          const auto factory = method(name);
          const auto results =
              name == "oracle" ? oracle
                               : eval::j_inter_xp(factory, p->heldout, seats,
                                                  config_.eval.episodes, seed,
                                                  training_seeds, options_.workers);
          auto row = eval::summarize(name, layout, results, &oracle,
                                     config_.eval.bootstrap_resamples,
                                     derive_seed(seed, "bootstrap:" + name),
                                     name == config_.eval.methods.front() ? &report.notes : nullptr);
          row.action_match = eval::action_match_frequency(
              factory, p->heldout, seats, config_.eval.episodes, seed, options_.workers);
          report.summary_rows.push_back(row);
          for (const auto& r : results) {
            eval::ReportRow pr;
            pr.method = name;
            pr.layout = layout;
            pr.partner = r.partner;
            pr.mean = r.mean_return;
            if (r.episode_returns.size() >= 2) {
              std::tie(pr.ci_low, pr.ci_high) = eval::bootstrap_ci(
                  r.episode_returns, 0.95, config_.eval.bootstrap_resamples,
                  derive_seed(seed, "bootstrap:" + name, r.partner));
            } else {
              pr.ci_low = pr.ci_high = pr.mean;
            }
            pr.scaled = eval::scaled_return(r.mean_return, oracle[r.partner].mean_return);
            report.partner_rows.push_back(pr);
          }
        }
        if (options_.trace && !options_.out_dir.empty() &&
            std::find(config_.eval.methods.begin(), config_.eval.methods.end(), "tbs") !=
                config_.eval.methods.end()) {
          // One traced episode per (partner, seat).
          const std::string dir = stage_dir("evaluate");
          for (int seat : seats) {
            auto e = ensemble(seat);
            coordinator::TBSOptions opt{config_.coordinator.window,
                                        config_.coordinator.steps_per_selection, true};
            for (std::size_t i = 0; i < p->heldout.size(); ++i) {
              coordinator::TBSAgent agent(e, opt);
              pool::PolicyActor partner(p->heldout[i].seat(1 - seat));
              const auto s = derive_seed(seed, "trace", i * 2 + seat);
              if (seat == 0) {
                pool::rollout(agent, partner, config_.env, 1, s, false);
              } else {
                pool::rollout(partner, agent, config_.env, 1, s, false);
              }
              coordinator::write_decision_log_csv(
                  (fs::path(dir) / ("decisions_partner" + std::to_string(i) + "_seat" +
                                    std::to_string(seat + 1) + ".csv"))
                      .string(),
                  agent.decision_log());
            }
          }
        }
        return report;
      },
      [&](const std::string& dir) {
        return eval::EvalReport::from_json(read_json((fs::path(dir) / "report.json").string()));
      },
      [&](const eval::EvalReport& r, const std::string& dir) {
        r.save((fs::path(dir) / "report.json").string(), (fs::path(dir) / "report.csv").string());
      },
      forced_ == "evaluate");
}

void Pipeline::ensure_stage(const std::string& stage) {
  if (stage == "build-pool") {
    pools();
  } else if (stage == "crossplay") {
    crossplay();
  } else if (stage == "cluster") {
    clusters();
  } else if (stage == "train-br") {
    best_responses();
  } else if (stage == "train-tom") {
    tom_models();
  } else if (stage == "evaluate") {
    evaluate();
  } else {
    throw Error("unknown stage '" + stage + "'");
  }
}

void Pipeline::run_stage(const std::string& stage) {
  forced_ = stage;
  struct Reset {
    std::string& s;
    ~Reset() { s.clear(); }
  } reset{forced_};
  ensure_stage(stage);
}

RunConfig apply_axis(const RunConfig& base, const std::string& axis, const std::string& value) {
  RunConfig c = base;
  auto as_int = [&] {
    try {
      return std::stoi(value);
    } catch (const std::exception&) {
      throw ConfigError("axis " + axis + " needs integer values, got '" + value + "'");
    }
  };
  if (axis == "pool_size") {
    c.pool.train_size = as_int();
  } else if (axis == "k_fixed") {
    c.cluster.k_fixed = as_int();
  } else if (axis == "window") {
    c.coordinator.window = as_int();
  } else if (axis == "steps_per_selection") {
    c.coordinator.steps_per_selection = as_int();
  } else if (axis == "concept_set") {
    c.env.concepts = envs::parse_granularity(value);
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "'");
  }
  c.validate();
  return c;
}

eval::EvalReport run_ablation(const std::string& axis, const std::vector<std::string>& grid,
                              const RunConfig& base, const PipelineOptions& options) {
  if (grid.empty()) throw ConfigError("ablation grid is empty");
  PipelineOptions opt = options;
  if (!opt.cache) opt.cache = std::make_shared<StageCache>();
  eval::EvalReport out;
  out.config_hash = config_hash(base);
  for (const auto& value : grid) {
    Pipeline p(apply_axis(base, axis, value), opt);
    const auto report = p.evaluate();
    for (auto r : report->summary_rows) {
      r.axis = axis;
      r.axis_value = value;
      out.summary_rows.push_back(r);
    }
    for (auto r : report->partner_rows) {
      r.axis = axis;
      r.axis_value = value;
      out.partner_rows.push_back(r);
    }
    for (const auto& n : report->notes) out.notes.push_back(axis + "=" + value + ": " + n);
  }
  return out;
}

}  // namespace tbs::pipeline

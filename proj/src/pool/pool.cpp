#include "tbs/pool/pool.hpp"

#include <filesystem>
#include <optional>

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/core/parallel.hpp"

namespace tbs::pool {

namespace fs = std::filesystem;
using learners::PolicyPair;
using learners::ShapingSpec;

std::vector<std::uint64_t> PartnerPool::seeds() const {
  std::vector<std::uint64_t> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.provenance.seed);
  return out;
}

std::uint64_t pair_seed(std::uint64_t seed, const std::string& stage, int index,
                        int attempt) {
  return derive_seed(derive_seed(seed, stage, index), "attempt", attempt);
}

namespace {

std::array<ShapingSpec, 2> draw_shaping(const envs::EnvSpec& env,
                                        const PoolOptions& options, int index,
                                        std::uint64_t s) {
  const auto base = learners::base_magnitudes(env.kind);
  Rng rng(derive_seed(s, "shaping"));
  std::array<ShapingSpec, 2> shaping{learners::sample_shaping(base, rng),
                                     learners::sample_shaping(base, rng)};
  if (options.planted_families > 0) {
    const auto families = learners::convention_families(options.planted_families);
    const auto& codebook = families[index % options.planted_families];
    shaping[0] = learners::planted_codebook_shaping(codebook, options.planted_bonus);
  }
  return shaping;
}

}  // namespace

PartnerPool build_pool(const envs::EnvSpec& env, int n,
                       const learners::TrainConfig& config, std::uint64_t seed,
                       const PoolOptions& options) {
  if (n < 1) throw ConfigError("pool size must be at least 1");
  if (options.planted_families > 0 && env.kind != envs::EnvKind::kSignaling) {
    throw ConfigError("planted convention families require the signaling game");
  }
  PartnerPool pool;
  pool.env = env;
  pool.pairs.resize(n);
  parallel_for(n, options.workers, [&](std::size_t i) {
    const int index = static_cast<int>(i);
    std::optional<DivergenceError> last;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      const std::uint64_t s = pair_seed(seed, options.stage, index, attempt);
      auto shaping = draw_shaping(env, options, index, s);
      learners::TrainConfig c = config;
      c.seed = s;
      try {
        PolicyPair pair = learners::train_selfplay_pair(env, shaping, c);
        pair.provenance.family =
            options.planted_families > 0 ? index % options.planted_families : -1;
        pool.pairs[i] = std::move(pair);
        return;
      } catch (const DivergenceError& e) {
        last = e;
      }
    }
    throw DivergenceError("pair " + std::to_string(index) + " diverged after " +
                          std::to_string(options.max_retries) +
                          " retries: " + last->what());
  });
  return pool;
}

PartnerPool build_heldout_pool(const envs::EnvSpec& env, int n,
                               const learners::TrainConfig& config,
                               std::uint64_t seed, PoolOptions options) {
  options.stage = "heldout-pool";
  return build_pool(env, n, config, seed, options);
}

namespace {

std::string seat_file(std::size_t index, int seat) {
  return "pair_" + std::to_string(index) + "_seat" + std::to_string(seat + 1) + ".json";
}

}  // namespace

nlohmann::json pool_manifest(const PartnerPool& pool, const std::string& config_hash) {
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& p = pool.pairs[i];
    pairs.push_back({{"index", i},
                     {"seed", p.provenance.seed},
                     {"family", p.provenance.family},
                     {"selfplay_return", p.selfplay_return},
                     {"shaping", p.provenance.shaping},
                     {"policies", {seat_file(i, 0), seat_file(i, 1)}}});
  }
  return {{"format", "tbs.pool"},
          {"version", 1},
          {"config_hash", config_hash},
          {"env", pool.env},
          {"pairs", pairs}};
}

void save_pool(const PartnerPool& pool, const std::string& dir,
               const std::string& config_hash) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (int seat = 0; seat < 2; ++seat) {
      pool.pairs[i].seats[seat].save((fs::path(dir) / seat_file(i, seat)).string());
    }
  }
  write_json_atomic((fs::path(dir) / "manifest.json").string(),
                    pool_manifest(pool, config_hash));
}

PartnerPool load_pool(const std::string& dir) {
  const auto manifest = read_json((fs::path(dir) / "manifest.json").string());
  if (manifest.value("format", "") != "tbs.pool") {
    throw Error(dir + " does not hold a pool manifest");
  }
  PartnerPool pool;
  pool.env = manifest.at("env").get<envs::EnvSpec>();
  for (const auto& entry : manifest.at("pairs")) {
    PolicyPair pair;
    const auto files = entry.at("policies").get<std::vector<std::string>>();
    for (int seat = 0; seat < 2; ++seat) {
      pair.seats[seat] = learners::Policy::load((fs::path(dir) / files[seat]).string());
    }
    pair.selfplay_return = entry.at("selfplay_return").get<double>();
    pair.provenance.seed = entry.at("seed").get<std::uint64_t>();
    pair.provenance.family = entry.at("family").get<int>();
    pair.provenance.shaping = entry.at("shaping").get<std::array<ShapingSpec, 2>>();
    pool.pairs.push_back(std::move(pair));
  }
  return pool;
}

}  // namespace tbs::pool

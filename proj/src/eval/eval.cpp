#include "tbs/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "tbs/core/errors.hpp"
#include "tbs/core/io.hpp"
#include "tbs/core/parallel.hpp"

namespace tbs::eval {

double j_xp(const std::vector<learners::PolicyPair>& runs, const envs::EnvSpec& env,
            int episodes, std::uint64_t seed) {
  if (runs.size() < 2) throw Error("cross-play needs at least two runs");
  double total = 0.0;
  int count = 0;
  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      // Each direction's seed depends only on the two runs' provenance, so
      // the estimate does not depend on their order.
      auto direction = [&](const learners::PolicyPair& x, const learners::PolicyPair& y) {
        const std::uint64_t s = derive_seed(seed, "jxp", x.provenance.seed ^ splitmix64(y.provenance.seed));
        return pool::rollout(x.seat(0), y.seat(1), env, episodes, s, false).mean_return;
      };
      const double ab = direction(runs[a], runs[b]);
      const double ba = direction(runs[b], runs[a]);
      total += 0.5 * (ab + ba);
      ++count;
    }
  }
  return total / count;
}

void check_disjoint(const pool::PartnerPool& heldout,
                    const std::vector<std::uint64_t>& training_seeds) {
  const std::set<std::uint64_t> train(training_seeds.begin(), training_seeds.end());
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    if (train.count(heldout[i].provenance.seed)) {
      throw Error("held-out partner " + std::to_string(i) +
                  " shares its training seed with the training pool");
    }
  }
}

namespace {

// Keyed by the partner's provenance, not its position in the pool.
std::uint64_t pairing_seed(std::uint64_t seed, const learners::PolicyPair& partner, int seat) {
  return derive_seed(seed, "inter-xp", partner.provenance.seed * 2 + static_cast<std::uint64_t>(seat));
}

pool::RolloutResult play(pool::Actor& coop, pool::Actor& partner, int coop_seat,
                         const envs::EnvSpec& env, int episodes, std::uint64_t seed,
                         bool record) {
  return coop_seat == 0 ? pool::rollout(coop, partner, env, episodes, seed, record)
                        : pool::rollout(partner, coop, env, episodes, seed, record);
}

}  // namespace

std::vector<PartnerResult> j_inter_xp(const CooperatorFactory& method,
                                      const pool::PartnerPool& heldout,
                                      const std::vector<int>& cooperator_seats,
                                      int episodes, std::uint64_t seed,
                                      const std::vector<std::uint64_t>& training_seeds,
                                      int workers) {
  if (cooperator_seats.empty()) throw Error("no cooperator seats given");
  check_disjoint(heldout, training_seeds);
  std::vector<PartnerResult> out(heldout.size());
  parallel_for(heldout.size(), workers, [&](std::size_t p) {
    PartnerResult r;
    r.partner = static_cast<int>(p);
    double sum = 0.0;
    for (int seat : cooperator_seats) {
      auto coop = method(heldout[p], seat);
      pool::PolicyActor partner(heldout[p].seat(1 - seat));
      const auto res = play(*coop, partner, seat, heldout.env, episodes,
                            pairing_seed(seed, heldout[p], seat), false);
      sum += res.mean_return;
      r.episode_returns.insert(r.episode_returns.end(), res.returns.begin(), res.returns.end());
    }
    r.mean_return = sum / static_cast<double>(cooperator_seats.size());
    out[p] = std::move(r);
  });
  return out;
}

double action_match_frequency(const CooperatorFactory& method,
                              const pool::PartnerPool& heldout,
                              const std::vector<int>& cooperator_seats,
                              int episodes, std::uint64_t seed, int workers) {
  std::vector<long> steps(heldout.size(), 0);
  std::vector<long> matches(heldout.size(), 0);
  parallel_for(heldout.size(), workers, [&](std::size_t p) {
    for (int seat : cooperator_seats) {
      auto coop = method(heldout[p], seat);
      pool::PolicyActor partner(heldout[p].seat(1 - seat));
      const auto res = play(*coop, partner, seat, heldout.env, episodes,
                            pairing_seed(seed, heldout[p], seat), true);
      const auto& oracle = heldout[p].seat(seat);
      for (const auto& traj : res.trajectories) {
        for (const auto& step : traj.steps) {
          if (!step.acting[seat]) continue;
          ++steps[p];
          matches[p] += step.actions[seat] == oracle.greedy_action(step.observations[seat]);
        }
      }
    }
  });
  double total = 0.0;
  int counted = 0;
  for (std::size_t p = 0; p < heldout.size(); ++p) {
    if (steps[p] == 0) continue;
    total += static_cast<double>(matches[p]) / static_cast<double>(steps[p]);
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& samples, double level,
                                       int resamples, std::uint64_t seed) {
  if (samples.size() < 2) throw Error("bootstrap needs at least two samples");
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
  if (resamples < 1) throw Error("bootstrap needs at least one resample");
  Rng rng(derive_seed(seed, "bootstrap"));
  const int n = static_cast<int>(samples.size());
  std::vector<double> means(resamples);
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += samples[uniform_int(rng, n)];
    means[r] = s / n;
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    const double pos = q * (resamples - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min<std::size_t>(lo + 1, resamples - 1);
    const double frac = pos - static_cast<double>(lo);
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

std::optional<double> scaled_return(double raw, double oracle) {
  if (oracle == 0.0) return std::nullopt;
  return std::max(0.0, raw / oracle);
}

ReportRow summarize(const std::string& method, const std::string& layout,
                    const std::vector<PartnerResult>& results,
                    const std::vector<PartnerResult>* oracle, int resamples,
                    std::uint64_t seed, std::vector<std::string>* notes) {
  ReportRow row;
  row.method = method;
  row.layout = layout;
  std::vector<double> means;
  for (const auto& r : results) means.push_back(r.mean_return);
  if (means.empty()) throw Error("no results to summarize");
  row.mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  if (means.size() >= 2) {
    std::tie(row.ci_low, row.ci_high) = bootstrap_ci(means, 0.95, resamples, seed);
  } else {
    row.ci_low = row.ci_high = row.mean;
  }
  if (oracle) {
    double total = 0.0;
    int counted = 0;
    for (std::size_t p = 0; p < results.size(); ++p) {
      const auto s = scaled_return(results[p].mean_return, (*oracle)[p].mean_return);
      if (s) {
        total += *s;
        ++counted;
      } else if (notes) {
        notes->push_back("partner " + std::to_string(p) +
                         " excluded from scaled averages: oracle return is 0");
      }
    }
    if (counted) row.scaled = total / counted;
  }
  return row;
}

const ReportRow* EvalReport::summary(const std::string& method,
                                     const std::string& axis_value) const {
  for (const auto& r : summary_rows) {
    if (r.method == method && r.axis_value == axis_value) return &r;
  }
  return nullptr;
}

namespace {

nlohmann::json row_json(const ReportRow& r) {
  nlohmann::json j = {{"method", r.method},     {"layout", r.layout},
                      {"axis", r.axis},         {"axis_value", r.axis_value},
                      {"partner", r.partner},   {"mean", r.mean},
                      {"ci_low", r.ci_low},     {"ci_high", r.ci_high},
                      {"scaled", nullptr},      {"action_match", nullptr}};
  if (r.scaled) j["scaled"] = *r.scaled;
  if (r.action_match) j["action_match"] = *r.action_match;
  return j;
}

ReportRow row_from_json(const nlohmann::json& j) {
  ReportRow r;
  r.method = j.at("method").get<std::string>();
  r.layout = j.at("layout").get<std::string>();
  r.axis = j.at("axis").get<std::string>();
  r.axis_value = j.at("axis_value").get<std::string>();
  r.partner = j.at("partner").get<int>();
  r.mean = j.at("mean").get<double>();
  r.ci_low = j.at("ci_low").get<double>();
  r.ci_high = j.at("ci_high").get<double>();
  if (!j.at("scaled").is_null()) r.scaled = j.at("scaled").get<double>();
  if (!j.at("action_match").is_null()) r.action_match = j.at("action_match").get<double>();
  return r;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json partners = nlohmann::json::array();
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& r : partner_rows) partners.push_back(row_json(r));
  for (const auto& r : summary_rows) summaries.push_back(row_json(r));
  return {{"format", "tbs.eval_report"},
          {"version", 1},
          {"config_hash", config_hash},
          {"summary", summaries},
          {"partners", partners},
          {"notes", notes}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& x : j.at("summary")) r.summary_rows.push_back(row_from_json(x));
  for (const auto& x : j.at("partners")) r.partner_rows.push_back(row_from_json(x));
  r.notes = j.value("notes", std::vector<std::string>{});
  return r;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "method,layout,axis,axis_value,partner,mean,ci_low,ci_high,scaled,action_match\n";
  auto emit = [&](const ReportRow& r) {
    out << r.method << ',' << r.layout << ',' << r.axis << ',' << r.axis_value << ','
        << (r.partner < 0 ? std::string("all") : std::to_string(r.partner)) << ','
        << r.mean << ',' << r.ci_low << ',' << r.ci_high << ',';
    if (r.scaled) out << *r.scaled;
    out << ',';
    if (r.action_match) out << *r.action_match;
    out << '\n';
  };
  for (const auto& r : summary_rows) emit(r);
  for (const auto& r : partner_rows) emit(r);
  return out.str();
}

void EvalReport::save(const std::string& json_path, const std::string& csv_path) const {
  write_json_atomic(json_path, to_json());
  write_file_atomic(csv_path, to_csv());
}

}  // namespace tbs::eval

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tbs/pool/pool.hpp"
#include "tbs/pool/rollout.hpp"

namespace tbs::eval {

// Creates the cooperator that will face `partner` from seat `seat`.
using CooperatorFactory =
    std::function<std::unique_ptr<pool::Actor>(const learners::PolicyPair& partner, int seat)>;

// Mean over unordered run pairs of (J(A1, B2) + J(B1, A2)) / 2.
double j_xp(const std::vector<learners::PolicyPair>& runs, const envs::EnvSpec& env,
            int episodes, std::uint64_t seed);

struct PartnerResult {
  int partner = 0;
  double mean_return = 0.0;               // averaged over cooperator seats
  std::vector<double> episode_returns;    // all seats, all episodes
};

// Throws when a held-out seed also appears in `training_seeds`.
void check_disjoint(const pool::PartnerPool& heldout,
                    const std::vector<std::uint64_t>& training_seeds);

// The cooperator plays each held-out partner from every seat in
// `cooperator_seats`; returns one result per partner. Rollout seeds depend
// only on (seed, partner, seat), so methods are paired.
std::vector<PartnerResult> j_inter_xp(const CooperatorFactory& method,
                                      const pool::PartnerPool& heldout,
                                      const std::vector<int>& cooperator_seats,
                                      int episodes, std::uint64_t seed,
                                      const std::vector<std::uint64_t>& training_seeds = {},
                                      int workers = 1);

// Fraction of the cooperator's acting timesteps on which its action equals
// the greedy action of the partner's co-trained policy in the same state.
double action_match_frequency(const CooperatorFactory& method,
                              const pool::PartnerPool& heldout,
                              const std::vector<int>& cooperator_seats,
                              int episodes, std::uint64_t seed, int workers = 1);

// Percentile bootstrap CI of the mean.
std::pair<double, double> bootstrap_ci(const std::vector<double>& samples,
                                       double level = 0.95, int resamples = 10000,
                                       std::uint64_t seed = 0);

// raw / oracle clamped at 0; nullopt when the oracle return is 0.
std::optional<double> scaled_return(double raw, double oracle);

struct ReportRow {
  std::string method;
  std::string layout;
  std::string axis;        // "" for plain evaluations
  std::string axis_value;
  int partner = -1;        // -1 for summary rows
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> scaled;
  std::optional<double> action_match;
};

struct EvalReport {
  std::string config_hash;
  std::vector<ReportRow> partner_rows;
  std::vector<ReportRow> summary_rows;
  std::vector<std::string> notes;

  const ReportRow* summary(const std::string& method,
                           const std::string& axis_value = "") const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  // Long format: method, layout, axis, axis_value, partner, mean, ci_low,
  // ci_high, scaled, action_match.
  std::string to_csv() const;
  void save(const std::string& json_path, const std::string& csv_path) const;
};

// Summary row (mean and bootstrap CI over per-partner means) plus optional
// scaled mean against per-partner oracle returns.
ReportRow summarize(const std::string& method, const std::string& layout,
                    const std::vector<PartnerResult>& results,
                    const std::vector<PartnerResult>* oracle, int resamples,
                    std::uint64_t seed, std::vector<std::string>* notes = nullptr);

}  // namespace tbs::eval

#include "tbs/learners/shaping.hpp"

#include <algorithm>
#include <numeric>

#include "tbs/core/errors.hpp"

namespace tbs::learners {

double ShapingSpec::multiplier(long step) const {
  if (anneal_horizon <= 0) return 1.0;
  if (step >= anneal_horizon) return 0.0;
  return 1.0 - static_cast<double>(step) / static_cast<double>(anneal_horizon);
}

double ShapingSpec::reward(const envs::EventVector& events, long step) const {
  double r = 0.0;
  const std::size_t n = std::min(events.size(), coefficients.size());
  for (std::size_t e = 0; e < n; ++e) {
    if (events[e]) r += coefficients[e];
  }
  return r == 0.0 ? 0.0 : r * multiplier(step);
}

ShapingSpec sample_shaping(std::span<const double> base_magnitudes, Rng& rng,
                           long anneal_horizon) {
  ShapingSpec s;
  s.base_magnitudes.assign(base_magnitudes.begin(), base_magnitudes.end());
  s.anneal_horizon = anneal_horizon;
  for (double b : base_magnitudes) {
    if (b < 0.0) throw ConfigError("shaping base magnitudes must be >= 0");
    s.coefficients.push_back(b * standard_normal(rng));
  }
  return s;
}

std::vector<double> kitchen_base_magnitudes() {
  return {0.15, 0.5, 0.5, 0.15, 0.15, 0.5};
}

std::vector<double> signaling_base_magnitudes() {
  return std::vector<double>(envs::kSignalingFineEvents, 0.05);
}

std::vector<double> base_magnitudes(envs::EnvKind kind) {
  return kind == envs::EnvKind::kKitchen ? kitchen_base_magnitudes()
                                         : signaling_base_magnitudes();
}

std::vector<Codebook> convention_families(int count) {
  std::vector<Codebook> all;
  Codebook p{0, 1, 2, 3};
  do {
    all.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  if (count < 0 || count > static_cast<int>(all.size())) {
    throw ConfigError("between 0 and 24 convention families are available");
  }
  auto distance = [](const Codebook& a, const Codebook& b) {
    int d = 0;
    for (int i = 0; i < envs::kSignalingNumbers; ++i) d += a[i] != b[i];
    return d;
  };
  std::vector<Codebook> chosen;
  std::vector<bool> used(all.size(), false);
  while (static_cast<int>(chosen.size()) < count) {
    int best = -1;
    int best_min = -1;
    int best_sum = -1;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (used[i]) continue;
      int mn = envs::kSignalingNumbers + 1;
      int sum = 0;
      for (const auto& c : chosen) {
        const int d = distance(all[i], c);
        mn = std::min(mn, d);
        sum += d;
      }
      if (mn > best_min || (mn == best_min && sum > best_sum)) {
        best = static_cast<int>(i);
        best_min = mn;
        best_sum = sum;
      }
    }
    used[best] = true;
    chosen.push_back(all[best]);
  }
  return chosen;
}

ShapingSpec planted_codebook_shaping(const Codebook& codebook, double bonus) {
  ShapingSpec s;
  s.base_magnitudes.assign(envs::kSignalingFineEvents, 0.0);
  s.coefficients.assign(envs::kSignalingFineEvents, 0.0);
  for (int h = 1; h <= envs::kSignalingNumbers; ++h) {
    const int e = envs::signaling_fine_event(h, codebook[h - 1]);
    s.coefficients[e] = bonus;
    s.base_magnitudes[e] = bonus;
  }
  return s;
}

void to_json(nlohmann::json& j, const ShapingSpec& s) {
  j = nlohmann::json{{"coefficients", s.coefficients},
                     {"base_magnitudes", s.base_magnitudes},
                     {"anneal_horizon", s.anneal_horizon}};
}

void from_json(const nlohmann::json& j, ShapingSpec& s) {
  s.coefficients = j.at("coefficients").get<std::vector<double>>();
  s.base_magnitudes = j.at("base_magnitudes").get<std::vector<double>>();
  s.anneal_horizon = j.value("anneal_horizon", 0L);
}

}  // namespace tbs::learners

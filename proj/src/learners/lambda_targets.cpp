#include "tbs/learners/lambda_targets.hpp"

#include <string>

#include "tbs/core/errors.hpp"

namespace tbs::learners {

std::vector<double> compute_lambda_targets(std::span<const double> rewards,
                                           std::span<const double> next_values,
                                           double gamma, double lambda) {
  if (rewards.size() != next_values.size()) {
    throw Error("lambda targets: " + std::to_string(rewards.size()) +
                " rewards but " + std::to_string(next_values.size()) +
                " bootstrap values");
  }
  const std::size_t n = rewards.size();
  std::vector<double> g(n);
  if (n == 0) return g;
  double next = next_values[n - 1];
  for (std::size_t t = n; t-- > 0;) {
    g[t] = rewards[t] + gamma * ((1.0 - lambda) * next_values[t] + lambda * next);
    next = g[t];
  }
  return g;
}

}  // namespace tbs::learners

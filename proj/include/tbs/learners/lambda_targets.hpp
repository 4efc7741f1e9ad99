#pragma once

#include <span>
#include <vector>

namespace tbs::learners {

// TD(lambda) return targets for a segment of T transitions:
//   G_t = r_t + gamma * ((1 - lambda) * v_{t+1} + lambda * G_{t+1}),
// closed by G_T = v_T. next_values[t] holds v_{t+1}; pass 0 for a terminal
// successor. Throws when the two sequences differ in length.
std::vector<double> compute_lambda_targets(std::span<const double> rewards,
                                           std::span<const double> next_values,
                                           double gamma, double lambda);

}  // namespace tbs::learners

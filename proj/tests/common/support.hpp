#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tbs/core/random.hpp"
#include "tbs/envs/kitchen.hpp"
#include "tbs/envs/signaling.hpp"
#include "tbs/learners/policy.hpp"
#include "tbs/pool/rollout.hpp"

namespace tbs::testing {

using envs::Item;
using envs::KitchenState;
using envs::Orientation;
using envs::Position;
using envs::Tile;

inline Position neighbor(Position p, Orientation o) {
  switch (o) {
    case Orientation::kUp: return {p.row - 1, p.col};
    case Orientation::kDown: return {p.row + 1, p.col};
    case Orientation::kLeft: return {p.row, p.col - 1};
    case Orientation::kRight: return {p.row, p.col + 1};
  }
  return p;
}

// Next action that walks `agent` to a floor cell next to a tile accepted by
// `wanted` and interacts with it. Stays when no such cell is reachable.
inline int walk_and_interact(const KitchenState& s, int agent,
                             const std::function<bool(Position)>& wanted,
                             bool interact = true) {
  const envs::Layout& l = *s.layout;
  const Position other = s.positions[1 - agent];
  auto faces_goal = [&](Position p, Orientation o) {
    const Position t = neighbor(p, o);
    return l.in_bounds(t) && wanted(t);
  };
  const Position start = s.positions[agent];
  if (faces_goal(start, s.orientations[agent])) {
    return interact ? envs::kInteract : envs::kStay;
  }
  for (int o = 0; o < 4; ++o) {
    if (faces_goal(start, static_cast<Orientation>(o))) {
      const Position t = neighbor(start, static_cast<Orientation>(o));
      // A direction toward a non-floor tile only turns the agent.
      if (l.at(t) != Tile::kFloor) return o;
    }
  }
  // Breadth-first search over floor cells; remembers the first move.
  std::map<std::pair<int, int>, int> first;
  std::deque<Position> queue{start};
  first[{start.row, start.col}] = -1;
  while (!queue.empty()) {
    const Position p = queue.front();
    queue.pop_front();
    const int move = first[{p.row, p.col}];
    if (move >= 0) {
      for (int o = 0; o < 4; ++o) {
        if (faces_goal(p, static_cast<Orientation>(o))) return move;
      }
    }
    for (int o = 0; o < 4; ++o) {
      const Position q = neighbor(p, static_cast<Orientation>(o));
      if (!l.in_bounds(q) || l.at(q) != Tile::kFloor || q == other) continue;
      if (first.count({q.row, q.col})) continue;
      first[{q.row, q.col}] = move >= 0 ? move : o;
      queue.push_back(q);
    }
  }
  return envs::kStay;
}

// Single-cook scripted chef: fills the first pot, fetches a plate while it
// cooks, plates the soup and serves it, forever.
inline int scripted_chef(const KitchenState& s, int agent) {
  const envs::Layout& l = *s.layout;
  const envs::PotState& pot = s.pots.at(0);
  const Position pot_cell = l.pots().at(0);
  auto is = [&](Tile t) { return [&l, t](Position p) { return l.at(p) == t; }; };
  auto is_pot = [&](Position p) { return p == pot_cell; };
  switch (s.held[agent]) {
    case Item::kNone:
      if (pot.onions < envs::kOnionsPerSoup) return walk_and_interact(s, agent, is(Tile::kOnionPile));
      return walk_and_interact(s, agent, is(Tile::kPlatePile));
    case Item::kOnion:
      return walk_and_interact(s, agent, is_pot);
    case Item::kPlate:
      return walk_and_interact(s, agent, is_pot, pot.done);
    case Item::kDish:
      return walk_and_interact(s, agent, is(Tile::kServe));
  }
  return envs::kStay;
}

// Concept labels by scanning backwards: c_t is the interaction vector of the
// latest-seen interact when walking from the end of the episode to t.
inline std::vector<envs::InteractionVector> backward_scan_labels(
    const pool::Trajectory& traj, int agent, std::size_t concepts) {
  const std::size_t T = traj.steps.size();
  std::vector<envs::InteractionVector> labels(T, envs::InteractionVector(concepts, 0));
  envs::InteractionVector carry(concepts, 0);
  for (std::size_t i = T; i-- > 0;) {
    const auto& v = traj.steps[i].interactions[agent];
    if (std::any_of(v.begin(), v.end(), [](auto x) { return x != 0; })) carry = v;
    labels[i] = carry;
  }
  return labels;
}

// Trajectory with sparse random one-hot interactions for both agents.
inline pool::Trajectory random_interaction_trajectory(Rng& rng, int T, int concepts,
                                                      double rate) {
  pool::Trajectory traj;
  traj.steps.resize(T);
  for (auto& step : traj.steps) {
    for (int a = 0; a < 2; ++a) {
      step.interactions[a].assign(concepts, 0);
      if (uniform01(rng) < rate) step.interactions[a][uniform_int(rng, concepts)] = 1;
    }
  }
  return traj;
}

// Block similarity with planted groups. Labels are ordered by first
// appearance, matching the canonical label order of the clustering.
struct Planting {
  Eigen::MatrixXd S;
  std::vector<int> labels;
};

inline Planting planted_blocks(const std::vector<int>& sizes, double within, double across,
                               double jitter, Rng& rng, bool shuffle) {
  std::vector<int> group;
  for (std::size_t b = 0; b < sizes.size(); ++b) group.insert(group.end(), sizes[b], static_cast<int>(b));
  if (shuffle) std::shuffle(group.begin(), group.end(), rng);
  const int n = static_cast<int>(group.size());
  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double v = group[i] == group[j] ? within : across;
      if (i != j && jitter > 0) v += jitter * (2 * uniform01(rng) - 1);
      if (i == j) v = 1.0;
      S(i, j) = S(j, i) = std::clamp(v, 0.0, 1.0) + 1e-4;
    }
  }
  std::map<int, int> canon;
  Planting out{S, {}};
  for (int g : group) {
    if (!canon.count(g)) canon[g] = static_cast<int>(canon.size());
    out.labels.push_back(canon[g]);
  }
  return out;
}

inline Eigen::MatrixXd random_orthogonal(int k, Rng& rng) {
  Eigen::MatrixXd A(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) A(i, j) = standard_normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ();
  // Fix column signs so the distribution is Haar.
  for (int j = 0; j < k; ++j) {
    if (qr.matrixQR()(j, j) < 0) Q.col(j) *= -1;
  }
  return Q;
}

// Expected signaling return of Alice from `a` with Bob from `b` when both
// follow their greedy codebooks over uniformly drawn numbers.
inline double codebook_return(const learners::PolicyPair& a, const learners::PolicyPair& b) {
  double round = 0.0;
  for (int h = 1; h <= 4; ++h) {
    const int letter = a.seat(0).greedy_action({0, h, 0, 0});
    if (letter == envs::kSignalingBail) continue;
    const int guess = b.seat(1).greedy_action({1, letter + 1, 0, 0});
    if (guess == envs::kSignalingBail) continue;
    round += guess + 1 == h ? 1.0 : -1.0;
  }
  return envs::kSignalingRounds * round / 4.0;
}

}  // namespace tbs::testing

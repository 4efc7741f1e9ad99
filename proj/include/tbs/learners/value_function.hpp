#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "tbs/envs/environment.hpp"

namespace tbs::learners {

enum class Representation { kTabular, kLinear };

std::string_view to_string(Representation r);
Representation parse_representation(std::string_view name);

// Observation encoding consumed by a ValueFunction. Tabular: the masked
// observation components (the table key). Linear: indices of the active
// one-hot features, one per observation component.
using Encoded = std::vector<int>;

struct EncodedHash {
  std::size_t operator()(const Encoded& e) const noexcept;
};

// Action values Q(o, .) over a discrete action set.
//
// Tabular: one row per visited key; rows of unvisited keys read as zeros.
// Linear: Q(o, a) = sum of w[f][a] over the active one-hot features f of o,
// with updates spread evenly over the active features.
class ValueFunction {
 public:
  ValueFunction() = default;
  static ValueFunction tabular(int action_count, std::vector<bool> key_mask);
  static ValueFunction linear(int action_count, std::vector<int> cardinalities);
  static ValueFunction make(Representation r, int action_count,
                            const envs::ObservationSpec& spec);

  Representation representation() const { return representation_; }
  int action_count() const { return action_count_; }

  Encoded encode(const envs::Observation& obs) const;

  // True once the encoding has received an update (always true for linear).
  bool visited(const Encoded& e) const;
  // Writes Q(e, .) into out (size action_count).
  void values(const Encoded& e, std::span<double> out) const;
  double value(const Encoded& e, int action) const;
  double max_value(const Encoded& e) const;
  // argmax with ties broken towards the lowest action index.
  int greedy(const Encoded& e) const;

  // Moves Q(e, action) by delta. Creates the tabular row if needed.
  void add(const Encoded& e, int action, double delta);

  bool all_finite() const;
  std::size_t size() const;

  bool operator==(const ValueFunction& other) const;

  nlohmann::json to_json() const;
  static ValueFunction from_json(const nlohmann::json& j);

 private:
  Representation representation_ = Representation::kTabular;
  int action_count_ = 0;
  std::vector<bool> key_mask_;
  std::unordered_map<Encoded, std::vector<double>, EncodedHash> table_;
  std::vector<int> offsets_;
  std::vector<double> weights_;
};

}  // namespace tbs::learners

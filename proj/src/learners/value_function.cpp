#include "tbs/learners/value_function.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tbs/core/errors.hpp"

namespace tbs::learners {

std::string_view to_string(Representation r) {
  return r == Representation::kTabular ? "tabular" : "linear";
}

Representation parse_representation(std::string_view name) {
  if (name == "tabular") return Representation::kTabular;
  if (name == "linear") return Representation::kLinear;
  throw ConfigError("unknown value representation '" + std::string(name) + "'");
}

std::size_t EncodedHash::operator()(const Encoded& e) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int v : e) {
    h ^= static_cast<std::uint32_t>(v);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h ^ (h >> 32));
}

ValueFunction ValueFunction::tabular(int action_count,
                                     std::vector<bool> key_mask) {
  ValueFunction vf;
  vf.representation_ = Representation::kTabular;
  vf.action_count_ = action_count;
  vf.key_mask_ = std::move(key_mask);
  return vf;
}

ValueFunction ValueFunction::linear(int action_count,
                                    std::vector<int> cardinalities) {
  ValueFunction vf;
  vf.representation_ = Representation::kLinear;
  vf.action_count_ = action_count;
  int total = 0;
  for (int c : cardinalities) {
    vf.offsets_.push_back(total);
    total += c;
  }
  vf.offsets_.push_back(total);
  vf.weights_.assign(static_cast<std::size_t>(total) * action_count, 0.0);
  return vf;
}

ValueFunction ValueFunction::make(Representation r, int action_count,
                                  const envs::ObservationSpec& spec) {
  return r == Representation::kTabular ? tabular(action_count, spec.key_mask)
                                       : linear(action_count, spec.cardinalities);
}

Encoded ValueFunction::encode(const envs::Observation& obs) const {
  Encoded e;
  if (representation_ == Representation::kTabular) {
    e.reserve(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (i >= key_mask_.size() || key_mask_[i]) e.push_back(obs[i]);
    }
    return e;
  }
  const std::size_t n = offsets_.size() - 1;
  e.reserve(n);
  for (std::size_t i = 0; i < n && i < obs.size(); ++i) {
    const int width = offsets_[i + 1] - offsets_[i];
    e.push_back(offsets_[i] + std::clamp(obs[i], 0, width - 1));
  }
  return e;
}

bool ValueFunction::visited(const Encoded& e) const {
  return representation_ == Representation::kLinear || table_.contains(e);
}

void ValueFunction::values(const Encoded& e, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (representation_ == Representation::kTabular) {
    auto it = table_.find(e);
    if (it != table_.end()) std::copy(it->second.begin(), it->second.end(), out.begin());
    return;
  }
  for (int f : e) {
    const double* w = &weights_[static_cast<std::size_t>(f) * action_count_];
    for (int a = 0; a < action_count_; ++a) out[a] += w[a];
  }
}

double ValueFunction::value(const Encoded& e, int action) const {
  if (representation_ == Representation::kTabular) {
    auto it = table_.find(e);
    return it == table_.end() ? 0.0 : it->second[action];
  }
  double q = 0.0;
  for (int f : e) q += weights_[static_cast<std::size_t>(f) * action_count_ + action];
  return q;
}

double ValueFunction::max_value(const Encoded& e) const {
  std::vector<double> q(action_count_);
  values(e, q);
  return *std::max_element(q.begin(), q.end());
}

int ValueFunction::greedy(const Encoded& e) const {
  std::vector<double> q(action_count_);
  values(e, q);
  // max_element returns the first maximum.
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

void ValueFunction::add(const Encoded& e, int action, double delta) {
  if (representation_ == Representation::kTabular) {
    auto [it, inserted] = table_.try_emplace(e);
    if (inserted) it->second.assign(action_count_, 0.0);
    it->second[action] += delta;
    return;
  }
  if (e.empty()) return;
  const double share = delta / static_cast<double>(e.size());
  for (int f : e) weights_[static_cast<std::size_t>(f) * action_count_ + action] += share;
}

bool ValueFunction::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (const auto& [k, row] : table_) {
    if (!std::all_of(row.begin(), row.end(), finite)) return false;
  }
  return std::all_of(weights_.begin(), weights_.end(), finite);
}

std::size_t ValueFunction::size() const {
  return representation_ == Representation::kTabular ? table_.size()
                                                     : weights_.size();
}

bool ValueFunction::operator==(const ValueFunction& other) const {
  return representation_ == other.representation_ &&
         action_count_ == other.action_count_ &&
         key_mask_ == other.key_mask_ && table_ == other.table_ &&
         offsets_ == other.offsets_ && weights_ == other.weights_;
}

nlohmann::json ValueFunction::to_json() const {
  nlohmann::json j;
  j["representation"] = to_string(representation_);
  j["action_count"] = action_count_;
  if (representation_ == Representation::kTabular) {
    j["key_mask"] = key_mask_;
    // Sorted so that equal tables serialize to identical bytes.
    std::map<Encoded, const std::vector<double>*> sorted;
    for (const auto& [k, row] : table_) sorted.emplace(k, &row);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [k, row] : sorted) {
      rows.push_back({{"key", k}, {"q", *row}});
    }
    j["table"] = std::move(rows);
  } else {
    j["offsets"] = offsets_;
    j["weights"] = weights_;
  }
  return j;
}

ValueFunction ValueFunction::from_json(const nlohmann::json& j) {
  ValueFunction vf;
  vf.representation_ = parse_representation(j.at("representation").get<std::string>());
  vf.action_count_ = j.at("action_count").get<int>();
  if (vf.representation_ == Representation::kTabular) {
    vf.key_mask_ = j.at("key_mask").get<std::vector<bool>>();
    for (const auto& row : j.at("table")) {
      auto q = row.at("q").get<std::vector<double>>();
      if (static_cast<int>(q.size()) != vf.action_count_) {
        throw Error("value table row has wrong action count");
      }
      vf.table_.emplace(row.at("key").get<Encoded>(), std::move(q));
    }
  } else {
    vf.offsets_ = j.at("offsets").get<std::vector<int>>();
    vf.weights_ = j.at("weights").get<std::vector<double>>();
  }
  return vf;
}

}  // namespace tbs::learners

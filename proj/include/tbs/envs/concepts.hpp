#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tbs::envs {

enum class Granularity { kGranular, kCoarse, kVeryCoarse, kActionBased };

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view name);

enum class EnvKind { kSignaling, kKitchen };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);

// Ordered list of high-level intention concepts. Environments emit
// interactions as a fine-grained event index (or a low-level action for the
// action-based set); the concept set projects those onto its own entries.
class ConceptSet {
 public:
  static ConceptSet make(EnvKind env, Granularity granularity);
  static ConceptSet make(EnvKind env, std::string_view granularity_name) {
    return make(env, parse_granularity(granularity_name));
  }

  EnvKind env() const { return env_; }
  Granularity granularity() const { return granularity_; }
  std::string name() const { return std::string(to_string(granularity_)); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool action_based() const { return granularity_ == Granularity::kActionBased; }
  // Concept index for a fine event, or -1 when the event is not tracked.
  int project_event(int fine_event) const;

  bool operator==(const ConceptSet& other) const {
    return env_ == other.env_ && granularity_ == other.granularity_;
  }

 private:
  EnvKind env_ = EnvKind::kSignaling;
  Granularity granularity_ = Granularity::kGranular;
  std::vector<std::string> names_;
  std::vector<int> fine_to_concept_;
};

// Kitchen interact taxonomy: 11 high-level actions, each expanded over up to
// four instances of the tile it targets.
inline constexpr int kKitchenCoarseConcepts = 11;
inline constexpr int kKitchenSlotsPerTile = 4;
inline constexpr int kKitchenFineEvents =
    kKitchenCoarseConcepts * kKitchenSlotsPerTile;
inline constexpr int kKitchenActions = 6;

enum KitchenConcept : int {
  kOnionPickupFromPile = 0,
  kPlatePickupFromPile,
  kDishPickupFromPot,
  kOnionPickupFromCounter,
  kPlatePickupFromCounter,
  kDishPickupFromCounter,
  kOnionDropInPot,
  kOnionDropOnCounter,
  kPlateDropOnCounter,
  kDishDropOnCounter,
  kDishDelivery,
};

const std::vector<std::string>& kitchen_coarse_names();

inline int kitchen_fine_event(int coarse, int slot) {
  return coarse * kKitchenSlotsPerTile + slot;
}

// Signaling: a fine event is (hidden number, action) of whoever acted.
inline constexpr int kSignalingNumbers = 4;
inline constexpr int kSignalingActions = 5;
inline constexpr int kSignalingFineEvents = kSignalingNumbers * kSignalingActions;

inline int signaling_fine_event(int hidden_number, int action) {
  return (hidden_number - 1) * kSignalingActions + action;
}

}  // namespace tbs::envs

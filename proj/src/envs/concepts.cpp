#include "tbs/envs/concepts.hpp"

#include "tbs/core/errors.hpp"

namespace tbs::envs {

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::kGranular: return "granular";
    case Granularity::kCoarse: return "coarse";
    case Granularity::kVeryCoarse: return "very_coarse";
    case Granularity::kActionBased: return "action_based";
  }
  return "granular";
}

Granularity parse_granularity(std::string_view name) {
  if (name == "granular") return Granularity::kGranular;
  if (name == "coarse") return Granularity::kCoarse;
  if (name == "very_coarse") return Granularity::kVeryCoarse;
  if (name == "action_based") return Granularity::kActionBased;
  throw ConfigError("unknown concept set '" + std::string(name) +
                    "' (expected granular, coarse, very_coarse, action_based)");
}

std::string_view to_string(EnvKind kind) {
  return kind == EnvKind::kSignaling ? "signaling" : "kitchen";
}

EnvKind parse_env_kind(std::string_view name) {
  if (name == "signaling") return EnvKind::kSignaling;
  if (name == "kitchen") return EnvKind::kKitchen;
  throw ConfigError("unknown environment '" + std::string(name) + "'");
}

const std::vector<std::string>& kitchen_coarse_names() {
  static const std::vector<std::string> names = {
      "onion_pickup_from_pile",    "plate_pickup_from_pile",
      "dish_pickup_from_pot",      "onion_pickup_from_counter",
      "plate_pickup_from_counter", "dish_pickup_from_counter",
      "onion_drop_in_pot",         "onion_drop_on_counter",
      "plate_drop_on_counter",     "dish_drop_on_counter",
      "dish_delivery"};
  return names;
}

namespace {

// pickup onion/plate/dish, drop onion/plate/dish
constexpr int kVeryCoarseOf[kKitchenCoarseConcepts] = {0, 1, 2, 0, 1, 2,
                                                       3, 3, 4, 5, 5};


}  // namespace

ConceptSet ConceptSet::make(EnvKind env, Granularity granularity) {
  ConceptSet set;
  set.env_ = env;
  set.granularity_ = granularity;
  if (env == EnvKind::kKitchen) {
    const auto& coarse = kitchen_coarse_names();
    set.fine_to_concept_.assign(kKitchenFineEvents, -1);
    switch (granularity) {
      case Granularity::kGranular:
        for (int c = 0; c < kKitchenCoarseConcepts; ++c) {
          for (int s = 0; s < kKitchenSlotsPerTile; ++s) {
            set.names_.push_back(coarse[c] + "_" + std::to_string(s));
            set.fine_to_concept_[kitchen_fine_event(c, s)] =
                kitchen_fine_event(c, s);
          }
        }
        break;
      case Granularity::kCoarse:
        set.names_ = coarse;
        for (int e = 0; e < kKitchenFineEvents; ++e) {
          set.fine_to_concept_[e] = e / kKitchenSlotsPerTile;
        }
        break;
      case Granularity::kVeryCoarse:
        set.names_ = {"pickup_onion", "pickup_plate", "pickup_dish",
                      "drop_onion",   "drop_plate",   "drop_dish"};
        for (int e = 0; e < kKitchenFineEvents; ++e) {
          set.fine_to_concept_[e] = kVeryCoarseOf[e / kKitchenSlotsPerTile];
        }
        break;
      case Granularity::kActionBased:
        set.names_ = {"up", "down", "left", "right", "stay", "interact"};
        break;
    }
    return set;
  }

  static const char* kAlice[kSignalingActions] = {"A", "B", "C", "D", "bail"};
  set.fine_to_concept_.assign(kSignalingFineEvents, -1);
  switch (granularity) {
    case Granularity::kGranular:
      for (int h = 1; h <= kSignalingNumbers; ++h) {
        for (int a = 0; a < kSignalingActions; ++a) {
          set.names_.push_back("number_" + std::to_string(h) + "_action_" +
                               kAlice[a]);
          const int e = signaling_fine_event(h, a);
          set.fine_to_concept_[e] = e;
        }
      }
      break;
    case Granularity::kActionBased:
      set.names_ = {"A_or_1", "B_or_2", "C_or_3", "D_or_4", "bail"};
      break;
    default:
      throw ConfigError("signaling game supports only the granular and "
                        "action_based concept sets");
  }
  return set;
}

int ConceptSet::project_event(int fine_event) const {
  if (fine_event < 0 ||
      fine_event >= static_cast<int>(fine_to_concept_.size())) {
    return -1;
  }
  return fine_to_concept_[fine_event];
}

}  // namespace tbs::envs

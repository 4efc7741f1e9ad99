#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tbs/envs/environment.hpp"

namespace tbs::envs {

enum class Tile : std::uint8_t {
  kFloor,
  kCounter,
  kOnionPile,
  kPot,
  kPlatePile,
  kServe,
};

enum class Item : std::uint8_t { kNone = 0, kOnion, kPlate, kDish };

enum class Orientation : std::uint8_t { kUp = 0, kDown, kLeft, kRight };

enum KitchenAction : int {
  kUp = 0,
  kDown = 1,
  kLeft = 2,
  kRight = 3,
  kStay = 4,
  kInteract = 5,
};

inline constexpr int kCookFrames = 20;
inline constexpr int kOnionsPerSoup = 3;
inline constexpr double kDeliveryReward = 20.0;
inline constexpr int kKitchenHorizon = 400;

struct Position {
  int row = 0;
  int col = 0;
  bool operator==(const Position&) const = default;
};

// Static tile map. Grid text: `.` floor, `X` counter, `O` onion pile, `P`
// pot, `D` plate pile, `S` serve, `1`/`2` agent start cells (floor).
class Layout {
 public:
  static Layout parse(std::string_view text, std::string name = "custom");
  static Layout load(const std::string& path);
  // cramped_room, large_room, forced_coordination
  static Layout builtin(std::string_view name);
  static const std::vector<std::string>& builtin_names();

  const std::string& name() const { return name_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Tile at(Position p) const { return tiles_[index(p)]; }
  bool in_bounds(Position p) const {
    return p.row >= 0 && p.row < rows_ && p.col >= 0 && p.col < cols_;
  }
  int index(Position p) const { return p.row * cols_ + p.col; }
  Position start(int agent) const { return starts_[agent]; }

  // Per-type instance slot in [0, 4) used by the granular concept set.
  // Counters: slot 0 for ordinary counters, 1..3 for interior counters.
  int slot(Position p) const { return slots_[index(p)]; }
  // Index into the pot / counter lists for a cell, or -1.
  int pot_index(Position p) const { return pot_of_[index(p)]; }
  int counter_index(Position p) const { return counter_of_[index(p)]; }
  int num_pots() const { return static_cast<int>(pots_.size()); }
  int num_counters() const { return static_cast<int>(counters_.size()); }
  const std::vector<Position>& pots() const { return pots_; }
  const std::vector<Position>& counters() const { return counters_; }

  std::string to_text() const;

 private:
  std::string name_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Tile> tiles_;
  std::array<Position, 2> starts_{};
  std::vector<int> slots_;
  std::vector<int> pot_of_;
  std::vector<int> counter_of_;
  std::vector<Position> pots_;
  std::vector<Position> counters_;
};

struct PotState {
  int onions = 0;
  int timer = 0;
  bool done = false;
  bool cooking() const { return onions == kOnionsPerSoup && !done; }
};

struct KitchenState {
  std::shared_ptr<const Layout> layout;
  std::array<Position, 2> positions{};
  std::array<Orientation, 2> orientations{Orientation::kUp, Orientation::kUp};
  std::array<Item, 2> held{Item::kNone, Item::kNone};
  std::vector<PotState> pots;
  std::vector<Item> counter_items;
  int frame = 0;
  int horizon = kKitchenHorizon;
  // Fine event fired by each agent on the most recent step, -1 for none.
  std::array<int, 2> last_events{-1, -1};
};

// Shaping events: place onion in pot, pick up plate, pick up soup, pick up
// from counter, drop on counter, deliver soup.
inline constexpr int kKitchenGameEvents = 6;
enum KitchenGameEvent : int {
  kEventPlaceOnionInPot = 0,
  kEventPickupPlate,
  kEventPickupSoup,
  kEventPickupFromCounter,
  kEventDropOnCounter,
  kEventDeliverSoup,
};

struct KitchenStepResult {
  KitchenState state;
  double reward = 0.0;
  std::array<int, 2> fine_events{-1, -1};
  std::array<EventVector, 2> game_events;
  bool done = false;
};

KitchenState kitchen_reset(std::shared_ptr<const Layout> layout,
                           int horizon = kKitchenHorizon);

// Pots already cooking tick first, then interacts resolve (agent 0 before
// agent 1), then movement. Conflicting moves (same target cell or a swap)
// are both cancelled. Invalid interacts are silent no-ops.
KitchenStepResult kitchen_step(const KitchenState& state,
                               const JointAction& actions);

class Kitchen final : public Environment {
 public:
  explicit Kitchen(std::shared_ptr<const Layout> layout,
                   Granularity concepts = Granularity::kGranular,
                   int horizon = kKitchenHorizon);

  void reset(std::uint64_t seed) override;
  StepOutcome step(const JointAction& actions) override;
  Observation observe(int agent) const override;

  int num_actions(int) const override { return kKitchenActions; }
  bool is_acting(int) const override { return !done(); }
  int timestep() const override { return state_.frame; }
  int horizon() const override { return state_.horizon; }
  bool done() const override { return state_.frame >= state_.horizon; }

  const ConceptSet& concepts() const override { return concepts_; }
  const ObservationSpec& observation_spec() const override { return spec_; }

  int num_game_events() const override { return kKitchenGameEvents; }
  const std::vector<std::string>& game_event_names() const override;
  std::vector<double> default_shaping() const override;

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<Kitchen>(*this);
  }

  const KitchenState& state() const { return state_; }
  void set_state(KitchenState state) { state_ = std::move(state); }

 private:
  ConceptSet concepts_;
  ObservationSpec spec_;
  KitchenState state_;
};

}  // namespace tbs::envs

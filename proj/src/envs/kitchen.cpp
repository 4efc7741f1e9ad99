#include "tbs/envs/kitchen.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "tbs/core/errors.hpp"

namespace tbs::envs {

namespace {

const std::map<std::string, std::string, std::less<>>& builtin_layouts() {
  static const std::map<std::string, std::string, std::less<>> layouts = {
      {"cramped_room",
       "XXPXX\n"
       "O..2O\n"
       "X1..X\n"
       "XDXSX\n"},
      {"large_room",
       "XXXPXXX\n"
       "O.....O\n"
       "X..1..X\n"
       "X.....X\n"
       "X..2..X\n"
       "O.....O\n"
       "XXDXSXX\n"},
      {"forced_coordination",
       "XXXPX\n"
       "O.X1P\n"
       "O2X.X\n"
       "D.X.X\n"
       "XXXSX\n"},
  };
  return layouts;
}

Position step_toward(Position p, Orientation o) {
  switch (o) {
    case Orientation::kUp: return {p.row - 1, p.col};
    case Orientation::kDown: return {p.row + 1, p.col};
    case Orientation::kLeft: return {p.row, p.col - 1};
    case Orientation::kRight: return {p.row, p.col + 1};
  }
  return p;
}

char tile_char(Tile t) {
  switch (t) {
    case Tile::kFloor: return '.';
    case Tile::kCounter: return 'X';
    case Tile::kOnionPile: return 'O';
    case Tile::kPot: return 'P';
    case Tile::kPlatePile: return 'D';
    case Tile::kServe: return 'S';
  }
  return '?';
}

}  // namespace

Layout Layout::parse(std::string_view text, std::string name) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ConfigError("layout '" + name + "' is empty");

  Layout l;
  l.name_ = std::move(name);
  l.rows_ = static_cast<int>(lines.size());
  l.cols_ = static_cast<int>(lines.front().size());
  const int cells = l.rows_ * l.cols_;
  l.tiles_.assign(cells, Tile::kFloor);
  l.slots_.assign(cells, 0);
  l.pot_of_.assign(cells, -1);
  l.counter_of_.assign(cells, -1);

  bool seen[2] = {false, false};
  int per_type[6] = {0, 0, 0, 0, 0, 0};
  int interior_counters = 0;
  for (int r = 0; r < l.rows_; ++r) {
    if (static_cast<int>(lines[r].size()) != l.cols_) {
      throw ConfigError("layout '" + l.name_ + "': row " + std::to_string(r) +
                        " has a different width");
    }
    for (int c = 0; c < l.cols_; ++c) {
      const Position p{r, c};
      const int i = l.index(p);
      Tile t = Tile::kFloor;
      switch (lines[r][c]) {
        case '.': case ' ': break;
        case '1': case '2': {
          const int agent = lines[r][c] - '1';
          if (seen[agent]) {
            throw ConfigError("layout '" + l.name_ + "': duplicate start for agent " +
                              std::string(1, lines[r][c]));
          }
          seen[agent] = true;
          l.starts_[agent] = p;
          break;
        }
        case 'X': t = Tile::kCounter; break;
        case 'O': t = Tile::kOnionPile; break;
        case 'P': t = Tile::kPot; break;
        case 'D': t = Tile::kPlatePile; break;
        case 'S': t = Tile::kServe; break;
        default:
          throw ConfigError("layout '" + l.name_ + "': unknown tile '" +
                            std::string(1, lines[r][c]) + "'");
      }
      l.tiles_[i] = t;
      if (t == Tile::kCounter) {
        const bool interior =
            r > 0 && c > 0 && r < l.rows_ - 1 && c < l.cols_ - 1;
        if (interior && interior_counters < kKitchenSlotsPerTile - 1) {
          l.slots_[i] = ++interior_counters;
        }
        l.counter_of_[i] = static_cast<int>(l.counters_.size());
        l.counters_.push_back(p);
      } else if (t != Tile::kFloor) {
        int& n = per_type[static_cast<int>(t)];
        if (n >= kKitchenSlotsPerTile) {
          throw ConfigError("layout '" + l.name_ + "': more than 4 '" +
                            std::string(1, tile_char(t)) + "' tiles");
        }
        l.slots_[i] = n++;
        if (t == Tile::kPot) {
          l.pot_of_[i] = static_cast<int>(l.pots_.size());
          l.pots_.push_back(p);
        }
      }
    }
  }
  if (!seen[0] || !seen[1]) {
    throw ConfigError("layout '" + l.name_ + "' needs start cells '1' and '2'");
  }
  return l;
}

Layout Layout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  if (auto dot = name.find_last_of('.'); dot != std::string::npos) {
    name = name.substr(0, dot);
  }
  return parse(buf.str(), name);
}

Layout Layout::builtin(std::string_view name) {
  const auto& all = builtin_layouts();
  auto it = all.find(name);
  if (it == all.end()) {
    throw ConfigError("unknown built-in layout '" + std::string(name) + "'");
  }
  return parse(it->second, it->first);
}

const std::vector<std::string>& Layout::builtin_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : builtin_layouts()) n.push_back(k);
    return n;
  }();
  return names;
}

std::string Layout::to_text() const {
  std::string out;
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const Position p{r, c};
      char ch = tile_char(at(p));
      if (p == starts_[0]) ch = '1';
      if (p == starts_[1]) ch = '2';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

KitchenState kitchen_reset(std::shared_ptr<const Layout> layout, int horizon) {
  KitchenState s;
  s.positions = {layout->start(0), layout->start(1)};
  s.pots.assign(layout->num_pots(), PotState{});
  s.counter_items.assign(layout->num_counters(), Item::kNone);
  s.horizon = horizon;
  s.layout = std::move(layout);
  return s;
}

KitchenStepResult kitchen_step(const KitchenState& state,
                               const JointAction& actions) {
  KitchenStepResult out;
  out.state = state;
  KitchenState& s = out.state;
  const Layout& layout = *s.layout;
  for (auto& ev : out.game_events) ev.assign(kKitchenGameEvents, 0);
  s.last_events = {-1, -1};
  if (s.frame >= s.horizon) {
    out.done = true;
    return out;
  }
  for (int a : actions) {
    if (a < 0 || a >= kKitchenActions) {
      throw InvalidActionError("kitchen action out of range: " +
                               std::to_string(a));
    }
  }

  for (PotState& pot : s.pots) {
    if (pot.cooking() && pot.timer > 0 && --pot.timer == 0) pot.done = true;
  }

  for (int i = 0; i < kNumAgents; ++i) {
    if (actions[i] != kInteract) continue;
    const Position target = step_toward(s.positions[i], s.orientations[i]);
    if (!layout.in_bounds(target)) continue;
    const int slot = layout.slot(target);
    Item& hand = s.held[i];
    EventVector& ev = out.game_events[i];
    int coarse = -1;
    switch (layout.at(target)) {
      case Tile::kFloor:
        break;
      case Tile::kOnionPile:
        if (hand == Item::kNone) {
          hand = Item::kOnion;
          coarse = kOnionPickupFromPile;
        }
        break;
      case Tile::kPlatePile:
        if (hand == Item::kNone) {
          hand = Item::kPlate;
          coarse = kPlatePickupFromPile;
          ev[kEventPickupPlate] = 1;
        }
        break;
      case Tile::kPot: {
        PotState& pot = s.pots[layout.pot_index(target)];
        if (hand == Item::kOnion && pot.onions < kOnionsPerSoup) {
          hand = Item::kNone;
          if (++pot.onions == kOnionsPerSoup) pot.timer = kCookFrames;
          coarse = kOnionDropInPot;
          ev[kEventPlaceOnionInPot] = 1;
        } else if (hand == Item::kPlate && pot.done) {
          hand = Item::kDish;
          pot = PotState{};
          coarse = kDishPickupFromPot;
          ev[kEventPickupSoup] = 1;
        }
        break;
      }
      case Tile::kServe:
        if (hand == Item::kDish) {
          hand = Item::kNone;
          out.reward += kDeliveryReward;
          coarse = kDishDelivery;
          ev[kEventDeliverSoup] = 1;
        }
        break;
      case Tile::kCounter: {
        Item& on_counter = s.counter_items[layout.counter_index(target)];
        if (hand == Item::kNone && on_counter != Item::kNone) {
          coarse = on_counter == Item::kOnion   ? kOnionPickupFromCounter
                   : on_counter == Item::kPlate ? kPlatePickupFromCounter
                                                : kDishPickupFromCounter;
          hand = on_counter;
          on_counter = Item::kNone;
          ev[kEventPickupFromCounter] = 1;
        } else if (hand != Item::kNone && on_counter == Item::kNone) {
          coarse = hand == Item::kOnion   ? kOnionDropOnCounter
                   : hand == Item::kPlate ? kPlateDropOnCounter
                                          : kDishDropOnCounter;
          on_counter = hand;
          hand = Item::kNone;
          ev[kEventDropOnCounter] = 1;
        }
        break;
      }
    }
    if (coarse >= 0) {
      out.fine_events[i] = kitchen_fine_event(coarse, slot);
      s.last_events[i] = out.fine_events[i];
    }
  }

  std::array<Position, 2> proposed = s.positions;
  for (int i = 0; i < kNumAgents; ++i) {
    const int a = actions[i];
    if (a > kRight) continue;
    s.orientations[i] = static_cast<Orientation>(a);
    const Position target = step_toward(s.positions[i], s.orientations[i]);
    if (layout.in_bounds(target) && layout.at(target) == Tile::kFloor) {
      proposed[i] = target;
    }
  }
  const bool same_cell = proposed[0] == proposed[1];
  const bool swap =
      proposed[0] == s.positions[1] && proposed[1] == s.positions[0];
  if (!same_cell && !swap) s.positions = proposed;

  ++s.frame;
  out.done = s.frame >= s.horizon;
  return out;
}

Kitchen::Kitchen(std::shared_ptr<const Layout> layout, Granularity concepts,
                 int horizon)
    : concepts_(ConceptSet::make(EnvKind::kKitchen, concepts)) {
  state_ = kitchen_reset(std::move(layout), horizon);
  const Layout& l = *state_.layout;
  auto add = [this](std::string name, int card, bool key) {
    spec_.names.push_back(std::move(name));
    spec_.cardinalities.push_back(card);
    spec_.key_mask.push_back(key);
  };
  add("frame", horizon + 1, false);
  for (const char* who : {"self", "partner"}) {
    const std::string w = who;
    add(w + "_row", l.rows(), true);
    add(w + "_col", l.cols(), true);
    add(w + "_orientation", 4, true);
    add(w + "_held", 4, true);
    if (w == "partner") spec_.partner_event_component = static_cast<int>(spec_.size());
    add(w + "_last_event", kKitchenFineEvents + 1, false);
  }
  for (int p = 0; p < l.num_pots(); ++p) {
    const std::string n = "pot" + std::to_string(p);
    add(n + "_onions", kOnionsPerSoup + 1, true);
    add(n + "_timer", kCookFrames + 1, true);
    add(n + "_done", 2, true);
  }
  for (int c = 0; c < l.num_counters(); ++c) {
    add("counter" + std::to_string(c) + "_item", 4, true);
  }
}

void Kitchen::reset(std::uint64_t) {
  state_ = kitchen_reset(state_.layout, state_.horizon);
}

StepOutcome Kitchen::step(const JointAction& actions) {
  KitchenStepResult r = kitchen_step(state_, actions);
  state_ = std::move(r.state);
  StepOutcome out;
  out.reward = r.reward;
  out.done = r.done;
  for (int i = 0; i < kNumAgents; ++i) {
    out.interactions[i].assign(concepts_.size(), 0);
    const int c = concepts_.action_based()
                      ? actions[i]
                      : concepts_.project_event(r.fine_events[i]);
    if (c >= 0) out.interactions[i][c] = 1;
    out.game_events[i] = std::move(r.game_events[i]);
  }
  return out;
}

Observation Kitchen::observe(int agent) const {
  const KitchenState& s = state_;
  Observation o;
  o.reserve(spec_.size());
  o.push_back(s.frame);
  for (int who : {agent, 1 - agent}) {
    o.push_back(s.positions[who].row);
    o.push_back(s.positions[who].col);
    o.push_back(static_cast<int>(s.orientations[who]));
    o.push_back(static_cast<int>(s.held[who]));
    o.push_back(s.last_events[who] + 1);
  }
  for (const PotState& pot : s.pots) {
    o.push_back(pot.onions);
    o.push_back(pot.timer);
    o.push_back(pot.done ? 1 : 0);
  }
  for (Item item : s.counter_items) o.push_back(static_cast<int>(item));
  return o;
}

const std::vector<std::string>& Kitchen::game_event_names() const {
  static const std::vector<std::string> names = {
      "place_onion_in_pot", "pickup_plate",     "pickup_soup",
      "pickup_from_counter", "drop_on_counter", "deliver_soup"};
  return names;
}

std::vector<double> Kitchen::default_shaping() const {
  // Annealed dense shaping: pot placement, plate pickup, soup pickup.
  return {3.0, 3.0, 5.0, 0.0, 0.0, 0.0};
}

}  // namespace tbs::envs

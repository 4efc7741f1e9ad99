#include "tbs/envs/signaling.hpp"

#include <string>

#include "tbs/core/errors.hpp"

namespace tbs::envs {

namespace {

int draw_number(Rng& rng) { return 1 + uniform_int(rng, kSignalingNumbers); }

std::string phase_name(SignalingPhase p) {
  switch (p) {
    case SignalingPhase::kAliceTurn: return "alice_turn";
    case SignalingPhase::kBobTurn: return "bob_turn";
    case SignalingPhase::kReveal: return "reveal";
  }
  return "?";
}

[[noreturn]] void reject(const SignalingState& s, const char* what) {
  throw InvalidActionError(std::string("invalid action for phase ") +
                           phase_name(s.phase) + ": " + what);
}

}  // namespace

SignalingState signaling_reset(std::uint64_t seed) {
  SignalingState s;
  s.rng.seed(seed);
  s.hidden_number = draw_number(s.rng);
  return s;
}

SignalingStepResult signaling_step(const SignalingState& state,
                                   const SignalingAction& action) {
  using Kind = SignalingAction::Kind;
  if (state.done) throw InvalidActionError("episode already finished");
  SignalingStepResult out{state};
  SignalingState& s = out.state;
  switch (s.phase) {
    case SignalingPhase::kAliceTurn: {
      int a = -1;
      if (action.kind == Kind::kSignal && action.value >= 0 &&
          action.value < kSignalingNumbers) {
        a = action.value;
      } else if (action.kind == Kind::kBail) {
        a = kSignalingBail;
      } else {
        reject(s, "Alice must signal A-D or bail");
      }
      s.alice_action = a;
      s.bob_action.reset();
      s.phase = a == kSignalingBail ? SignalingPhase::kReveal
                                    : SignalingPhase::kBobTurn;
      out.actor = 0;
      out.action_index = a;
      out.fine_event = signaling_fine_event(s.hidden_number, a);
      break;
    }
    case SignalingPhase::kBobTurn: {
      int b = -1;
      if (action.kind == Kind::kGuess && action.value >= 1 &&
          action.value <= kSignalingNumbers) {
        b = action.value - 1;
        out.reward = action.value == s.hidden_number ? 1.0 : -1.0;
      } else if (action.kind == Kind::kBail) {
        b = kSignalingBail;
      } else {
        reject(s, "Bob must guess 1-4 or bail");
      }
      s.bob_action = b;
      s.phase = SignalingPhase::kReveal;
      out.actor = 1;
      out.action_index = b;
      out.fine_event = signaling_fine_event(s.hidden_number, b);
      break;
    }
    case SignalingPhase::kReveal: {
      if (action.kind != Kind::kContinue) reject(s, "only continue is legal");
      if (s.round_index + 1 >= kSignalingRounds) {
        s.done = true;
      } else {
        ++s.round_index;
        s.hidden_number = draw_number(s.rng);
        s.phase = SignalingPhase::kAliceTurn;
        s.alice_action.reset();
        s.bob_action.reset();
      }
      break;
    }
  }
  s.cumulative_reward += out.reward;
  ++s.timestep;
  out.done = s.done;
  return out;
}

SignalingGame::SignalingGame(Granularity concepts)
    : concepts_(ConceptSet::make(EnvKind::kSignaling, concepts)) {
  spec_.names = {"phase", "private", "partner_action", "partner_event"};
  // Alice: hidden number 1..4; Bob: alice action+1 in 0..5.
  // Third component: Alice sees Bob's action+1 at reveal, Bob sees the
  // revealed number at reveal.
  spec_.cardinalities = {3, 6, 6, kSignalingFineEvents + 1};
  spec_.key_mask = {true, true, true, false};
  spec_.partner_event_component = 3;
  state_ = signaling_reset(0);
}

void SignalingGame::reset(std::uint64_t seed) {
  state_ = signaling_reset(seed);
}

bool SignalingGame::is_acting(int agent) const {
  if (state_.done) return false;
  return (agent == 0 && state_.phase == SignalingPhase::kAliceTurn) ||
         (agent == 1 && state_.phase == SignalingPhase::kBobTurn);
}

StepOutcome SignalingGame::step(const JointAction& actions) {
  SignalingAction action = SignalingAction::proceed();
  auto decode = [](int a, bool alice) {
    if (a == kSignalingBail) return SignalingAction::bail();
    if (a < 0 || a > kSignalingBail) {
      throw InvalidActionError("signaling action out of range: " +
                               std::to_string(a));
    }
    return alice ? SignalingAction::signal(a) : SignalingAction::guess(a + 1);
  };
  if (state_.phase == SignalingPhase::kAliceTurn) action = decode(actions[0], true);
  if (state_.phase == SignalingPhase::kBobTurn) action = decode(actions[1], false);

  SignalingStepResult r = signaling_step(state_, action);
  state_ = std::move(r.state);

  StepOutcome out;
  out.reward = r.reward;
  out.done = r.done;
  for (int i = 0; i < kNumAgents; ++i) {
    out.interactions[i].assign(concepts_.size(), 0);
    out.game_events[i].assign(kSignalingFineEvents, 0);
  }
  if (r.actor >= 0) {
    const int c = concepts_.action_based() ? r.action_index
                                           : concepts_.project_event(r.fine_event);
    if (c >= 0) out.interactions[r.actor][c] = 1;
    out.game_events[r.actor][r.fine_event] = 1;
  }
  return out;
}

Observation SignalingGame::observe(int agent) const {
  const SignalingState& s = state_;
  const bool reveal = s.phase == SignalingPhase::kReveal;
  Observation o(4, 0);
  o[0] = static_cast<int>(s.phase);
  if (agent == 0) {
    o[1] = s.hidden_number;
    if (reveal && s.bob_action) o[2] = *s.bob_action + 1;
  } else {
    if (s.alice_action) o[1] = *s.alice_action + 1;
    if (reveal) o[2] = s.hidden_number;
  }
  if (reveal) {
    // Each agent sees the partner's (number, action) event once revealed.
    const int partner = 1 - agent;
    if (partner == 0 && s.alice_action) {
      o[3] = signaling_fine_event(s.hidden_number, *s.alice_action) + 1;
    } else if (partner == 1 && s.bob_action) {
      o[3] = signaling_fine_event(s.hidden_number, *s.bob_action) + 1;
    }
  }
  return o;
}

const std::vector<std::string>& SignalingGame::game_event_names() const {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (int h = 1; h <= kSignalingNumbers; ++h) {
      for (int a = 0; a < kSignalingActions; ++a) {
        n.push_back("number_" + std::to_string(h) + "_action_" +
                    std::to_string(a));
      }
    }
    return n;
  }();
  return names;
}

}  // namespace tbs::envs

#pragma once

#include <optional>

#include "tbs/core/random.hpp"
#include "tbs/envs/environment.hpp"

namespace tbs::envs {

// Two-player signaling game. Each of 16 rounds: Alice sees a hidden number in
// [1, 4] and signals A-D or bails; Bob sees the signal and guesses the number
// or bails; then the number is revealed. Correct guess +1, wrong guess -1,
// any bail 0.
inline constexpr int kSignalingRounds = 16;
inline constexpr int kSignalingBail = 4;  // action index of "bail" for both

enum class SignalingPhase { kAliceTurn = 0, kBobTurn = 1, kReveal = 2 };

struct SignalingAction {
  enum class Kind { kSignal, kGuess, kBail, kContinue };
  Kind kind = Kind::kContinue;
  int value = 0;  // letter 0..3 for kSignal, number 1..4 for kGuess

  static SignalingAction signal(int letter) { return {Kind::kSignal, letter}; }
  static SignalingAction guess(int number) { return {Kind::kGuess, number}; }
  static SignalingAction bail() { return {Kind::kBail, 0}; }
  static SignalingAction proceed() { return {Kind::kContinue, 0}; }
};

struct SignalingState {
  int round_index = 0;
  int hidden_number = 1;
  SignalingPhase phase = SignalingPhase::kAliceTurn;
  // 0..3 for A..D, kSignalingBail for bail.
  std::optional<int> alice_action;
  // 0..3 for guesses 1..4, kSignalingBail for bail.
  std::optional<int> bob_action;
  double cumulative_reward = 0.0;
  int timestep = 0;
  bool done = false;
  Rng rng;
};

struct SignalingStepResult {
  SignalingState state;
  double reward = 0.0;
  bool done = false;
  int actor = -1;       // agent whose action resolved, -1 for reveal steps
  int fine_event = -1;  // (hidden, action) event of the actor
  int action_index = -1;
};

SignalingState signaling_reset(std::uint64_t seed);

// Throws InvalidActionError when the action does not fit the phase.
SignalingStepResult signaling_step(const SignalingState& state,
                                   const SignalingAction& action);

// Environment adapter. Integer actions per agent: 0..3 are A..D (Alice) or
// guesses 1..4 (Bob), 4 is bail. Actions of the non-acting agent are ignored.
class SignalingGame final : public Environment {
 public:
  explicit SignalingGame(Granularity concepts = Granularity::kGranular);

  void reset(std::uint64_t seed) override;
  StepOutcome step(const JointAction& actions) override;
  Observation observe(int agent) const override;

  int num_actions(int) const override { return kSignalingActions; }
  bool is_acting(int agent) const override;
  int timestep() const override { return state_.timestep; }
  int horizon() const override { return 3 * kSignalingRounds; }
  bool done() const override { return state_.done; }

  const ConceptSet& concepts() const override { return concepts_; }
  const ObservationSpec& observation_spec() const override { return spec_; }

  int num_game_events() const override { return kSignalingFineEvents; }
  const std::vector<std::string>& game_event_names() const override;
  std::vector<double> default_shaping() const override {
    return std::vector<double>(kSignalingFineEvents, 0.0);
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<SignalingGame>(*this);
  }

  const SignalingState& state() const { return state_; }

 private:
  ConceptSet concepts_;
  ObservationSpec spec_;
  SignalingState state_;
};

}  // namespace tbs::envs

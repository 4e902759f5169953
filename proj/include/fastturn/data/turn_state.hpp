#pragma once

#include <array>
#include <string>

#include "fastturn/common.hpp"

namespace fastturn::data {

enum class TurnState { Complete = 0, Incomplete = 1, Backchannel = 2, Wait = 3 };

inline constexpr int kNumTurnStates = 4;

inline constexpr std::array<TurnState, 4> all_turn_states() {
    return {TurnState::Complete, TurnState::Incomplete, TurnState::Backchannel, TurnState::Wait};
}

inline const char* to_string(TurnState s) {
    switch (s) {
        case TurnState::Complete: return "complete";
        case TurnState::Incomplete: return "incomplete";
        case TurnState::Backchannel: return "backchannel";
        case TurnState::Wait: return "wait";
    }
    return "?";
}

inline TurnState turn_state_from_string(const std::string& s) {
    if (s == "complete") return TurnState::Complete;
    if (s == "incomplete") return TurnState::Incomplete;
    if (s == "backchannel") return TurnState::Backchannel;
    if (s == "wait") return TurnState::Wait;
    throw ConfigError("unknown turn_state: \"" + s + "\"");
}

} // namespace fastturn::data

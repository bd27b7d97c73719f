#include "ecpo/types.hpp"

#include <algorithm>
#include <sstream>

namespace ecpo {

std::string to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::Ask: return "Ask";
        case ActionKind::Recommend: return "Recommend";
        case ActionKind::Response: return "Response";
        case ActionKind::Search: return "Search";
    }
    return "Response";
}

ActionKind action_kind_from_string(std::string_view s) {
    std::string k = to_lower(trim(s));
    if (k == "ask") return ActionKind::Ask;
    if (k == "recommend") return ActionKind::Recommend;
    if (k == "response") return ActionKind::Response;
    if (k == "search") return ActionKind::Search;
    throw ParseError("unknown action kind: " + std::string(s));
}

std::string Action::render() const {
    return to_string(kind) + "[" + payload + "]";
}

Action parse_action(std::string_view text) {
    std::string t = trim(text);
    std::size_t open = t.find('[');
    if (open == std::string::npos || t.back() != ']')
        throw ParseError("action must be Kind[payload]: " + t);
    Action a;
    a.kind = action_kind_from_string(t.substr(0, open));
    a.payload = t.substr(open + 1, t.size() - open - 2);
    if (trim(a.payload).empty()) throw ParseError("action payload is empty: " + t);
    return a;
}

ECRecord make_ec_record(std::string explanation, int flex, int coh, int guide,
                        std::optional<int> claimed) {
    if (flex < 0 || flex > 2) throw SchemaError("flexibility deduction out of range");
    if (coh < 0 || coh > 2) throw SchemaError("coherence deduction out of range");
    if (guide < 0 || guide > 1) throw SchemaError("guidance deduction out of range");
    ECRecord r;
    r.explanation = std::move(explanation);
    r.flexibility_deduction = flex;
    r.coherence_deduction = coh;
    r.guidance_deduction = guide;
    r.score = ec_score(flex, coh, guide);
    r.discrepancy = claimed.has_value() && *claimed != r.score;
    return r;
}

int ec_score(int flex, int coh, int guide) { return 5 - flex - coh - guide; }

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Success: return "success";
        case Outcome::Failure: return "failure";
        case Outcome::Truncated: return "truncated";
    }
    return "failure";
}

Outcome outcome_from_string(std::string_view s) {
    std::string k = to_lower(trim(s));
    if (k == "success") return Outcome::Success;
    if (k == "failure") return Outcome::Failure;
    if (k == "truncated") return Outcome::Truncated;
    throw ParseError("unknown outcome: " + std::string(s));
}

bool recommend_matches(std::string_view payload, std::string_view target_title) {
    return contains_normalized(payload, target_title);
}

Outcome classify_outcome(const std::vector<Turn>& turns, const ItemRef& target,
                         bool truncated) {
    for (const auto& turn : turns) {
        if (turn.action.kind == ActionKind::Recommend &&
            recommend_matches(turn.action.payload, target.title))
            return Outcome::Success;
    }
    return truncated ? Outcome::Truncated : Outcome::Failure;
}

std::string DialogueState::render_history() const {
    std::ostringstream ss;
    for (const auto& u : history) ss << u.speaker << ": " << u.text << "\n";
    return ss.str();
}

std::string DialogueState::render() const {
    std::ostringstream ss;
    ss << render_history();
    if (last_retrieval) {
        ss << "search results:\n";
        for (const auto& item : *last_retrieval)
            ss << "- " << item.title << " :: " << item.description << "\n";
    }
    return ss.str();
}

namespace {

void check_turn_index(const Episode& episode, int turn_index) {
    if (turn_index < 1 || turn_index > static_cast<int>(episode.turns.size())) {
        std::ostringstream ss;
        ss << "turn index " << turn_index << " out of range [1, " << episode.turns.size()
           << "]";
        throw std::out_of_range(ss.str());
    }
}

}  // namespace

DialogueState reconstruct_state(const Episode& episode, int turn_index) {
    check_turn_index(episode, turn_index);
    DialogueState state;
    state.history.push_back({"user", episode.opening_utterance});
    for (int i = 0; i < turn_index - 1; ++i) {
        const Turn& turn = episode.turns[static_cast<std::size_t>(i)];
        state.history.push_back({"agent", turn.action.render()});
        state.history.push_back({"user", turn.user_utterance});
        if (turn.retrieval) state.last_retrieval = turn.retrieval;
    }
    state.turn_index = turn_index;
    return state;
}

DialogueState response_context(const Episode& episode, int turn_index) {
    DialogueState state = reconstruct_state(episode, turn_index);
    const Turn& turn = episode.turns[static_cast<std::size_t>(turn_index - 1)];
    if (turn.retrieval) state.last_retrieval = turn.retrieval;
    return state;
}

DialogueState advance_state(DialogueState state, const Turn& turn) {
    state.history.push_back({"agent", turn.action.render()});
    state.history.push_back({"user", turn.user_utterance});
    if (turn.retrieval) state.last_retrieval = turn.retrieval;
    state.turn_index += 1;
    return state;
}

bool Persona::complete() const {
    return !activities.empty() && !interests.empty() && !language_style.empty() &&
           !orientations.empty();
}

std::string Persona::render() const {
    std::ostringstream ss;
    ss << "Activities: " << join(activities, ", ") << "\n";
    ss << "Interests: " << join(interests, ", ") << "\n";
    ss << "Language: " << language_style << "\n";
    ss << "Orientations: " << orientations << "\n";
    return ss.str();
}

}  // namespace ecpo

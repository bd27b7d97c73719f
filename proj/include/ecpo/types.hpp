#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecpo/util.hpp"

namespace ecpo {

enum class ActionKind { Ask, Recommend, Response, Search };

std::string to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view s);

// One agent action, rendered in dialogue transcripts and training targets as
// "Ask[...]", "Recommend[...]", "Response[...]" or "Search[...]".
struct Action {
    ActionKind kind = ActionKind::Response;
    std::string payload;

    bool user_facing() const { return kind != ActionKind::Search; }
    std::string render() const;
    bool operator==(const Action&) const = default;
};

// Parses "Kind[payload]" (payload may contain nested brackets; the closing
// bracket is the last one). Throws ParseError on anything else.
Action parse_action(std::string_view text);

struct ItemRef {
    std::string item_id;
    std::string title;
    std::string description;
    std::string domain;

    bool operator==(const ItemRef&) const = default;
};

// Per-turn expectation-confirmation record. The score is always recomputed
// from the deductions; `discrepancy` is set when the backend stated a
// different total.
struct ECRecord {
    std::string explanation;
    int flexibility_deduction = 0;  // 0..2
    int coherence_deduction = 0;    // 0..2
    int guidance_deduction = 0;     // 0..1
    int score = 5;
    bool discrepancy = false;

    bool operator==(const ECRecord&) const = default;
};

// Builds a record with the score recomputed from the deductions. `claimed`
// is the backend's stated total, if any.
ECRecord make_ec_record(std::string explanation, int flex, int coh, int guide,
                        std::optional<int> claimed = std::nullopt);
int ec_score(int flex, int coh, int guide);

struct Turn {
    int index = 1;  // 1-based, consecutive within an episode
    std::string strategy;
    std::string reasoning;
    Action action;
    std::optional<std::vector<ItemRef>> retrieval;  // present iff this turn searched
    std::string user_policy;
    std::string user_utterance;
    std::optional<ECRecord> ec;

    bool operator==(const Turn&) const = default;
};

enum class Outcome { Success, Failure, Truncated };
std::string to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct Episode {
    std::string task_id;
    std::string persona_id;
    ItemRef target;
    std::string opening_utterance;
    std::string opener_source;  // "generated" or "template"
    std::vector<Turn> turns;
    Outcome outcome = Outcome::Failure;
    int max_turns = 5;
    std::string error;  // non-empty iff Truncated by a backend failure

    bool operator==(const Episode&) const = default;
};

// Matching rule for "the Recommend payload names the target item":
// normalized containment of the target title in the payload.
bool recommend_matches(std::string_view payload, std::string_view target_title);

// Pure classification from turns + target + matching rule. `truncated` marks
// episodes cut short by an error rather than the turn budget.
Outcome classify_outcome(const std::vector<Turn>& turns, const ItemRef& target,
                         bool truncated = false);

struct Utterance {
    std::string speaker;  // "user" or "agent"
    std::string text;

    bool operator==(const Utterance&) const = default;
};

// The agent-visible dialogue state s_t: history through the previous user
// utterance plus the most recent retrieval context. Never carries the target.
struct DialogueState {
    std::vector<Utterance> history;
    std::optional<std::vector<ItemRef>> last_retrieval;
    int turn_index = 1;

    bool operator==(const DialogueState&) const = default;

    // Transcript rendering used in prompts and training data.
    std::string render() const;
    std::string render_history() const;  // without the retrieval block
};

// State at the start of turn `turn_index` (1-based): history through
// u_{turn_index-1}, retrieval context from strictly earlier turns.
DialogueState reconstruct_state(const Episode& episode, int turn_index);

// State the agent actually observed when emitting turn `turn_index`'s
// user-facing action: same as reconstruct_state, but when the turn itself
// searched, its results replace the carried retrieval context.
DialogueState response_context(const Episode& episode, int turn_index);

// Appends a completed turn to a state; reconstruct_state(e, t) advanced by
// e.turns[t-1] equals reconstruct_state(e, t+1).
DialogueState advance_state(DialogueState state, const Turn& turn);

struct Persona {
    std::string id;
    std::vector<std::string> activities;
    std::vector<std::string> interests;
    std::string language_style;
    std::string orientations;
    std::vector<std::string> source_reviews;

    bool complete() const;  // all four dimensions non-empty
    std::string render() const;
    bool operator==(const Persona&) const = default;
};

struct Task {
    std::string id;
    std::string persona_id;
    ItemRef target;
    std::string domain;

    bool operator==(const Task&) const = default;
};

// Turn-level preference pair: the unit of the preference dataset.
struct PreferencePair {
    DialogueState state;
    std::string dispreferred;  // original response text (agent output format)
    std::string preferred;     // rewritten response text
    ECRecord ec;
    std::string rewrite_rationale;
    std::string source_episode;
    int source_turn = 0;
    bool edit_ratio_exceeded = false;

    bool operator==(const PreferencePair&) const = default;
};

}  // namespace ecpo

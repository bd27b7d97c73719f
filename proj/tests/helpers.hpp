#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ecpo/types.hpp"

namespace ecpo::testing {

// The trailing X keeps titles prefix-free so the normalized-containment
// matching rule cannot confuse "... 1" with "... 12".
inline ItemRef make_item(int i, const std::string& domain = "book") {
    return ItemRef{"i" + std::to_string(1000 + i),
                   "The Test Title " + std::to_string(i) + "X",
                   "A " + domain + " about theme " + std::to_string(i % 7) + ".", domain};
}

inline ECRecord ec(int flex, int coh, int guide) {
    return make_ec_record("scripted", flex, coh, guide);
}

// A deterministic scripted episode. `succeed_at` (1-based) plants a
// Recommend of the target at that turn; 0 means no success. `search_at`
// lists turns that carry retrieval results; when `plant_target_in_search`
// the target is injected into the first listed search turn.
struct EpisodeSpec {
    std::string task_id = "t-1";
    std::string persona_id = "u100";
    ItemRef target = make_item(1);
    int turns = 3;
    int max_turns = 5;
    int succeed_at = 0;
    std::vector<int> search_at;
    bool plant_target_in_search = false;
    bool with_ec = true;
    unsigned seed = 7;
};

inline Episode make_episode(const EpisodeSpec& spec) {
    std::mt19937 rng(spec.seed);
    Episode e;
    e.task_id = spec.task_id;
    e.persona_id = spec.persona_id;
    e.target = spec.target;
    e.opening_utterance = "I'm looking for something with theme " +
                          std::to_string(rng() % 7) + "!";
    e.opener_source = "template";
    e.max_turns = spec.max_turns;

    int n_turns = spec.succeed_at > 0 ? spec.succeed_at : spec.turns;
    for (int t = 1; t <= n_turns; ++t) {
        Turn turn;
        turn.index = t;
        turn.strategy = "step-" + std::to_string(t);
        turn.reasoning = "reasoning for turn " + std::to_string(t);
        bool searched =
            std::find(spec.search_at.begin(), spec.search_at.end(), t) != spec.search_at.end();
        if (searched) {
            std::vector<ItemRef> results;
            for (int k = 0; k < 5; ++k) results.push_back(make_item(100 + t * 10 + k));
            if (spec.plant_target_in_search && t == spec.search_at.front())
                results[1] = spec.target;
            turn.retrieval = std::move(results);
        }
        if (spec.succeed_at == t) {
            turn.action = {ActionKind::Recommend,
                           spec.target.title + " - this should be exactly it."};
            turn.user_policy = "Accepting the Recommendation";
            turn.user_utterance = "Yes, " + spec.target.title + " is what I wanted!";
        } else if (searched) {
            turn.action = {ActionKind::Recommend,
                           turn.retrieval->front().title + " - maybe this fits."};
            turn.user_policy = "Expressing Dissatisfaction";
            turn.user_utterance = "Not quite, I want something else (turn " +
                                  std::to_string(t) + ").";
        } else {
            turn.action = {ActionKind::Ask,
                           "Could you tell me more? (turn " + std::to_string(t) + ")"};
            turn.user_policy = "Providing More Details";
            turn.user_utterance = "Sure: detail " + std::to_string(rng() % 100) + ".";
        }
        if (spec.with_ec) {
            int flex = static_cast<int>(rng() % 3);
            int coh = static_cast<int>(rng() % 3);
            int guide = static_cast<int>(rng() % 2);
            turn.ec = make_ec_record("deductions for turn " + std::to_string(t), flex, coh,
                                     guide);
        }
        e.turns.push_back(std::move(turn));
    }
    e.outcome = classify_outcome(e.turns, e.target);
    return e;
}

// Temporary directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("ecpo-test-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace ecpo::testing

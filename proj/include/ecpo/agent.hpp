#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/embedding.hpp"
#include "ecpo/gateway.hpp"
#include "ecpo/prompts.hpp"
#include "ecpo/simulator.hpp"
#include "ecpo/types.hpp"

namespace ecpo {

struct AgentConfig {
    std::string domain = "catalog";
    int max_turns = 5;
    int top_k = 5;
    int max_recommendations = 5;
    double temperature = 0.0;
    bool store_ec = true;          // keep EC records on turns (preference collection)
    bool per_user_catalog = true;  // scope retrieval to the task user's items
    // Ablation: retrieval queries concatenate the dialogue history instead of
    // using the agent's Search keyword.
    bool query_from_history = false;
    // Enforced grounding: a Recommend naming no previously retrieved item is
    // an agent error (episode Truncated). Makes SR <= R structural.
    bool recommend_only_retrieved = false;
};

struct AgentStep {
    std::string strategy;
    std::string reasoning;
    Action action;
    std::string raw;  // verbatim model output, replayed on within-turn re-invocation
    int attempts = 1;
};

// One ActCRS step: strategy, reasoning and exactly one action from a single
// backend call. The agent prompt is built from the dialogue state alone; the
// target item never reaches it.
AgentStep agent_step(const DialogueState& state, Gateway& gateway,
                     const PromptRegistry& prompts, const AgentConfig& config);

// The re-invocation after a Search: same turn, retrieval results appended as
// an observation, must yield a user-facing action.
AgentStep agent_step_with_observation(const DialogueState& state, const AgentStep& search_step,
                                      const std::vector<ScoredItem>& results, Gateway& gateway,
                                      const PromptRegistry& prompts, const AgentConfig& config);

struct EpisodeDeps {
    Gateway* gateway = nullptr;
    Retriever retriever;
    const PromptRegistry* prompts = nullptr;
    Simulator* simulator = nullptr;
    const Catalog* catalog = nullptr;  // for per-user retrieval scoping
};

// Runs one full episode: alternates agent and simulator, executes Search
// against the retriever within the turn, stops early on success or an
// accepting user policy. Backend failures yield a Truncated episode with
// error metadata, never an exception.
Episode run_episode(const Task& task, const Persona& persona, EpisodeDeps& deps,
                    const AgentConfig& config);

struct RunReport {
    int tasks = 0;
    int successes = 0;
    int failures = 0;
    int truncated = 0;
    double success_rate = 0.0;
    std::map<std::string, std::uint64_t> ledger;
    long wall_ms = 0;

    nlohmann::json to_json() const;
};

struct BatchResult {
    std::vector<Episode> episodes;  // task order, independent of completion order
    RunReport report;
};

// Runs tasks at the given parallelism. Episodes come back in task order, so
// a deterministic backend serializes byte-identically at any parallelism.
BatchResult run_batch(const std::vector<Task>& tasks,
                      const std::map<std::string, Persona>& personas, EpisodeDeps& deps,
                      const AgentConfig& config, int parallelism = 1);

}  // namespace ecpo

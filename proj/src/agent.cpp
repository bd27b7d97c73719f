#include "ecpo/agent.hpp"

#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

namespace ecpo {

using nlohmann::json;

namespace {

std::string agent_system_prompt(const PromptRegistry& prompts, const AgentConfig& config) {
    return fill_prompt(prompts.get("actcrs_agent").text,
                       {{"domain", config.domain},
                        {"max_recommendations", std::to_string(config.max_recommendations)}});
}

AgentStep parse_step(const StructuredResult& structured) {
    AgentStep step;
    step.strategy = structured.value.at("strategy").get<std::string>();
    step.reasoning = structured.value.at("reasoning").get<std::string>();
    step.action = parse_action(structured.value.at("action").get<std::string>());
    step.raw = structured.value.dump();
    step.attempts = structured.attempts;
    return step;
}

bool valid_step(const json& j) {
    if (!j.at("strategy").is_string() || !j.at("reasoning").is_string() ||
        !j.at("action").is_string())
        return false;
    try {
        parse_action(j.at("action").get<std::string>());
        return true;
    } catch (const ParseError&) {
        return false;
    }
}

std::string render_results(const std::vector<ScoredItem>& results) {
    std::ostringstream ss;
    for (const auto& r : results) ss << "- " << r.item.title << " :: " << r.item.description
                                     << "\n";
    return trim(ss.str());
}

}  // namespace

AgentStep agent_step(const DialogueState& state, Gateway& gateway,
                     const PromptRegistry& prompts, const AgentConfig& config) {
    CompletionRequest request;
    request.system_prompt = agent_system_prompt(prompts, config);
    request.messages = {
        {"user", fill_prompt(prompts.get("agent_turn").text, {{"state", state.render()}})}};
    request.temperature = config.temperature;
    request.response_schema = "actcrs_step";
    return parse_step(gateway.complete_structured(Role::Agent, request, valid_step));
}

AgentStep agent_step_with_observation(const DialogueState& state, const AgentStep& search_step,
                                      const std::vector<ScoredItem>& results, Gateway& gateway,
                                      const PromptRegistry& prompts,
                                      const AgentConfig& config) {
    CompletionRequest request;
    request.system_prompt = agent_system_prompt(prompts, config);
    request.messages = {
        {"user", fill_prompt(prompts.get("agent_turn").text, {{"state", state.render()}})},
        {"assistant", search_step.raw},
        {"user", fill_prompt(prompts.get("agent_observation").text,
                             {{"results", render_results(results)}})}};
    request.temperature = config.temperature;
    request.response_schema = "actcrs_step";
    return parse_step(gateway.complete_structured(Role::Agent, request, valid_step));
}

Episode run_episode(const Task& task, const Persona& persona, EpisodeDeps& deps,
                    const AgentConfig& config) {
    Episode episode;
    episode.task_id = task.id;
    episode.persona_id = task.persona_id;
    episode.target = task.target;
    episode.max_turns = config.max_turns;

    std::set<std::string> allowed;
    const std::set<std::string>* scope = nullptr;
    if (config.per_user_catalog && deps.catalog) {
        auto it = deps.catalog->user_items.find(task.persona_id);
        if (it != deps.catalog->user_items.end()) {
            allowed.insert(it->second.begin(), it->second.end());
            scope = &allowed;
        }
    }

    try {
        auto [opener, source] = deps.simulator->opening_utterance(persona, task.target);
        episode.opening_utterance = opener;
        episode.opener_source = source;

        DialogueState state;
        state.history.push_back({"user", episode.opening_utterance});
        state.turn_index = 1;

        std::vector<ItemRef> retrieved_so_far;
        for (int t = 1; t <= config.max_turns; ++t) {
            AgentStep step = agent_step(state, *deps.gateway, *deps.prompts, config);

            Turn turn;
            turn.index = t;
            if (step.action.kind == ActionKind::Search) {
                std::string query = step.action.payload;
                if (config.query_from_history) {
                    // ChatRec-style ablation: the whole user-side history is
                    // the query.
                    std::string concat;
                    for (const auto& u : state.history)
                        if (u.speaker == "user") concat += u.text + " ";
                    query = trim(concat);
                }
                auto results = deps.retriever.search(query, scope);
                std::vector<ItemRef> items;
                for (const auto& r : results) items.push_back(r.item);
                retrieved_so_far.insert(retrieved_so_far.end(), items.begin(), items.end());
                turn.retrieval = std::move(items);
                step = agent_step_with_observation(state, step, results, *deps.gateway,
                                                   *deps.prompts, config);
                if (step.action.kind == ActionKind::Search)
                    throw EcpoError("agent searched twice in one turn");
            }
            if (config.recommend_only_retrieved &&
                step.action.kind == ActionKind::Recommend) {
                bool grounded = false;
                for (const auto& item : retrieved_so_far)
                    if (recommend_matches(step.action.payload, item.title)) grounded = true;
                if (!grounded)
                    throw EcpoError("recommendation names no retrieved item at turn " +
                                    std::to_string(t));
            }
            turn.strategy = step.strategy;
            turn.reasoning = step.reasoning;
            turn.action = step.action;

            SimTurn sim = deps.simulator->simulate_user(persona, task.target, state,
                                                        step.action);
            turn.user_policy = sim.policy;
            turn.user_utterance = sim.utterance;
            if (config.store_ec) turn.ec = sim.ec;

            episode.turns.push_back(turn);
            state = advance_state(std::move(state), episode.turns.back());

            bool recommended_target = step.action.kind == ActionKind::Recommend &&
                                      recommend_matches(step.action.payload,
                                                        task.target.title);
            if (recommended_target || is_acceptance_policy(sim.policy)) break;
        }
        episode.outcome = classify_outcome(episode.turns, episode.target);
    } catch (const std::exception& e) {
        // Backend failures truncate the episode; a batch run never crashes.
        episode.error = e.what();
        episode.outcome = classify_outcome(episode.turns, episode.target, /*truncated=*/true);
    }
    return episode;
}

json RunReport::to_json() const {
    json l = json::object();
    for (const auto& [role, n] : ledger) l[role] = n;
    return {{"tasks", tasks},         {"successes", successes},
            {"failures", failures},   {"truncated", truncated},
            {"success_rate", success_rate}, {"ledger", l},
            {"wall_ms", wall_ms}};
}

BatchResult run_batch(const std::vector<Task>& tasks,
                      const std::map<std::string, Persona>& personas, EpisodeDeps& deps,
                      const AgentConfig& config, int parallelism) {
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    auto start = std::chrono::steady_clock::now();

    BatchResult result;
    result.episodes.resize(tasks.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            auto it = personas.find(task.persona_id);
            if (it == personas.end()) {
                Episode failed;
                failed.task_id = task.id;
                failed.persona_id = task.persona_id;
                failed.target = task.target;
                failed.max_turns = config.max_turns;
                failed.outcome = Outcome::Truncated;
                failed.error = "no persona for id " + task.persona_id;
                result.episodes[i] = std::move(failed);
                continue;
            }
            result.episodes[i] = run_episode(task, it->second, deps, config);
        }
    };

    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                                                  std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();

    RunReport& report = result.report;
    report.tasks = static_cast<int>(tasks.size());
    for (const auto& e : result.episodes) {
        switch (e.outcome) {
            case Outcome::Success: ++report.successes; break;
            case Outcome::Failure: ++report.failures; break;
            case Outcome::Truncated: ++report.truncated; break;
        }
    }
    report.success_rate =
        tasks.empty() ? 0.0 : static_cast<double>(report.successes) / tasks.size();
    report.ledger = deps.gateway->ledger().snapshot();
    report.wall_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                           std::chrono::steady_clock::now() - start)
                                           .count());
    return result;
}

}  // namespace ecpo

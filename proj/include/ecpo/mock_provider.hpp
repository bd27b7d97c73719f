#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/gateway.hpp"

namespace ecpo {

// One scripted rule: the pattern is matched against the request fingerprint
// text (see request_fingerprint_text); the first matching rule wins.
struct ScriptedRule {
    std::string pattern;
    std::string response;  // object responses are stored dumped
};

// Deterministic mock behavior. Resolution order: scripted rules, explicit
// fallback, then (when enabled) the stage-aware auto synthesizer. The reply
// is a pure function of the request, so identical requests always get
// identical responses at any concurrency.
struct ScriptedBehavior {
    std::vector<ScriptedRule> rules;
    std::optional<std::string> fallback;
    bool auto_synthesize = true;

    static ScriptedBehavior from_json(const nlohmann::json& j);
    static ScriptedBehavior from_file(const std::filesystem::path& path);
};

class MockProvider : public Provider {
  public:
    MockProvider() = default;
    explicit MockProvider(ScriptedBehavior behavior) : behavior_(std::move(behavior)) {}

    std::string complete(const CompletionRequest& request) override;
    std::string name() const override { return "mock"; }

  private:
    ScriptedBehavior behavior_;
};

namespace mockgen {
// Stage synthesizers, exposed for targeted tests. Each is a pure function of
// the request text.
std::string agent_step(const CompletionRequest& request);
std::string simulator_turn(const CompletionRequest& request);
std::string sim_policy(const CompletionRequest& request);
std::string sim_utterance(const CompletionRequest& request);
std::string ec_confirm(const CompletionRequest& request);
std::string rewrite(const CompletionRequest& request);
std::string judge(const CompletionRequest& request);
std::string persona(const CompletionRequest& request);
std::string opener(const CompletionRequest& request);

// Deterministic EC deductions for a (response, history) pair; shared by the
// in-dialogue and standalone confirmation paths so both agree on replays.
void synth_deductions(const std::string& response, const std::string& history, int& flex,
                      int& coh, int& guide);

// Two distinctive title tokens used as user hints; never the full title.
std::vector<std::string> hint_words(const std::string& title);
}  // namespace mockgen

}  // namespace ecpo

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/catalog.hpp"
#include "ecpo/gateway.hpp"
#include "ecpo/prompts.hpp"
#include "ecpo/types.hpp"

namespace ecpo {

struct SimulatorConfig {
    std::string domain = "catalog";
    double temperature = 0.0;
    bool three_call_mode = false;  // issue policy / utterance / EC separately
    std::string opener_mode = "generated";  // or "template"
};

struct SimTurn {
    std::string policy;
    std::string utterance;
    ECRecord ec;
    bool leak_redacted = false;
    int attempts = 1;
};

// The user simulator: persona-conditioned policy-based responses plus the
// per-turn expectation-confirmation scoring.
class Simulator {
  public:
    Simulator(Gateway* gateway, const PromptRegistry* prompts, SimulatorConfig config)
        : gateway_(gateway), prompts_(prompts), config_(std::move(config)) {}

    // One user turn: response policy, utterance in persona voice, EC record.
    // The utterance is redacted (and flagged) if it would reveal the target
    // title before the agent has recommended it.
    SimTurn simulate_user(const Persona& persona, const ItemRef& target,
                          const DialogueState& history, const Action& agent_response);

    // Standalone expectation confirmation over a recorded exchange. The
    // score is recomputed from the deductions; when the backend's stated
    // rating disagrees, the recomputed value wins and the record is flagged.
    ECRecord confirm_expectation(const ItemRef& target, const std::string& history_text,
                                 const std::string& response_text);

    std::pair<std::string, std::string> opening_utterance(const Persona& persona,
                                                          const ItemRef& target);

    const SimulatorConfig& config() const { return config_; }

  private:
    Gateway* gateway_;
    const PromptRegistry* prompts_;
    SimulatorConfig config_;
};

// A policy label like "Accepting the Recommendation" ends the episode.
bool is_acceptance_policy(std::string_view policy);

ECRecord parse_ec_json(const nlohmann::json& j);

struct PersonaBuildConfig {
    int min_reviews = 3;
    int max_reviews_per_prompt = 10;
    std::uint64_t seed = 0;
    std::string domain = "catalog";
};

struct PersonaBuildResult {
    std::vector<Persona> personas;
    int skipped_users = 0;  // below the review-count minimum
    std::vector<std::string> log;
};

// Samples users with enough reviews and infers one AIO persona per user via
// the backend. Persona ids are the source user ids.
PersonaBuildResult build_personas(const Catalog& catalog, Gateway& gateway,
                                  const PromptRegistry& prompts, int n,
                                  const PersonaBuildConfig& config = {});

struct DiversityReport {
    std::vector<std::pair<std::string, double>> max_scores;  // persona id -> max ROUGE-L
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;

    nlohmann::json to_json() const;
};

// For each sampled persona, the maximum ROUGE-L F-measure against the other
// sampled personas. Requires at least 2 personas; `sample` is clamped to the
// population size.
DiversityReport persona_diversity(const std::vector<Persona>& personas, int sample = 100,
                                  std::uint64_t seed = 0);

std::string render_target(const ItemRef& target);

}  // namespace ecpo

#include "ecpo/simulator.hpp"

#include <algorithm>
#include <sstream>

namespace ecpo {

using nlohmann::json;

std::string render_target(const ItemRef& target) {
    return target.title + " :: " + target.description;
}

bool is_acceptance_policy(std::string_view policy) {
    return to_lower(std::string(policy)).find("accept") != std::string::npos;
}

ECRecord parse_ec_json(const json& j) {
    auto as_int = [](const json& v) -> int {
        if (v.is_number()) return v.get<int>();
        if (v.is_string()) return std::stoi(v.get<std::string>());
        throw SchemaError("EC field is neither number nor numeric string");
    };
    return make_ec_record(j.at("reason").get<std::string>(),
                          as_int(j.at("flexibility_deduction")),
                          as_int(j.at("coherence_deduction")),
                          as_int(j.at("guidance_deduction")), as_int(j.at("rating")));
}

namespace {

bool valid_ec_fields(const json& j) {
    auto in_range = [&](const char* key, int lo, int hi) {
        if (!j.contains(key)) return false;
        const auto& v = j.at(key);
        int x;
        if (v.is_number())
            x = v.get<int>();
        else if (v.is_string()) {
            try {
                x = std::stoi(v.get<std::string>());
            } catch (const std::exception&) {
                return false;
            }
        } else {
            return false;
        }
        return x >= lo && x <= hi;
    };
    return in_range("flexibility_deduction", 0, 2) && in_range("coherence_deduction", 0, 2) &&
           in_range("guidance_deduction", 0, 1) && in_range("rating", 0, 5);
}

// Replace the target title (case-insensitive, literal) in an utterance.
std::string redact_title(const std::string& utterance, const std::string& title) {
    std::string lower_u = to_lower(utterance);
    std::string lower_t = to_lower(title);
    std::string out;
    std::size_t pos = 0;
    bool replaced = false;
    while (true) {
        std::size_t hit = lower_u.find(lower_t, pos);
        if (hit == std::string::npos) {
            out += utterance.substr(pos);
            break;
        }
        out += utterance.substr(pos, hit - pos);
        out += "that item";
        pos = hit + lower_t.size();
        replaced = true;
    }
    if (!replaced || contains_normalized(out, title))
        return "I'd rather not spell it out - I'm hoping you can land on it from my hints.";
    return out;
}

}  // namespace

SimTurn Simulator::simulate_user(const Persona& persona, const ItemRef& target,
                                 const DialogueState& history, const Action& agent_response) {
    const std::string rubric = prompts_->get("ec_rubric").text;
    SimTurn result;

    if (!config_.three_call_mode) {
        CompletionRequest request;
        request.system_prompt =
            fill_prompt(prompts_->get("simulator_turn").text,
                        {{"domain", config_.domain},
                         {"persona", persona.render()},
                         {"target", render_target(target)},
                         {"rubric", rubric},
                         {"history", history.render_history()},
                         {"last_turn_response", agent_response.render()}});
        request.messages = {{"user", "Follow the three steps and output the JSON object only."}};
        request.temperature = config_.temperature;
        request.response_schema = "simulator_turn";

        auto structured = gateway_->complete_structured(
            Role::Simulator, request, [](const json& j) {
                return j.at("policy").is_string() && j.at("utterance").is_string() &&
                       j.at("ec").is_object() && valid_ec_fields(j.at("ec"));
            });
        result.policy = structured.value.at("policy").get<std::string>();
        result.utterance = structured.value.at("utterance").get<std::string>();
        result.ec = parse_ec_json(structured.value.at("ec"));
        result.attempts = structured.attempts;
    } else {
        // Ablation mode: the three steps as three ordered backend calls.
        auto base_slots = std::map<std::string, std::string>{
            {"domain", config_.domain},
            {"persona", persona.render()},
            {"target", render_target(target)},
            {"history", history.render_history()},
            {"last_turn_response", agent_response.render()}};

        CompletionRequest policy_request;
        policy_request.system_prompt =
            fill_prompt(prompts_->get("simulator_policy").text, base_slots);
        policy_request.messages = {{"user", "Output the JSON object only."}};
        policy_request.temperature = config_.temperature;
        policy_request.response_schema = "sim_policy";
        auto policy = gateway_->complete_structured(Role::Simulator, policy_request);
        result.policy = policy.value.at("policy").get<std::string>();

        auto utterance_slots = base_slots;
        utterance_slots["policy"] = result.policy;
        CompletionRequest utterance_request;
        utterance_request.system_prompt =
            fill_prompt(prompts_->get("simulator_utterance").text, utterance_slots);
        utterance_request.messages = {{"user", "Output the JSON object only."}};
        utterance_request.temperature = config_.temperature;
        utterance_request.response_schema = "sim_utterance";
        auto utterance = gateway_->complete_structured(Role::Simulator, utterance_request);
        result.utterance = utterance.value.at("utterance").get<std::string>();

        result.ec = confirm_expectation(target, history.render_history(),
                                        agent_response.render());
        result.attempts = policy.attempts + utterance.attempts;
    }

    // Leak guard: the target's name may only appear once the agent has
    // already recommended it.
    bool already_revealed =
        recommend_matches(agent_response.payload, target.title) ||
        contains_normalized(history.render_history(), target.title);
    if (!already_revealed && contains_normalized(result.utterance, target.title)) {
        result.utterance = redact_title(result.utterance, target.title);
        result.leak_redacted = true;
    }
    return result;
}

ECRecord Simulator::confirm_expectation(const ItemRef& target, const std::string& history_text,
                                        const std::string& response_text) {
    CompletionRequest request;
    request.system_prompt =
        fill_prompt(prompts_->get("ec_confirm").text,
                    {{"domain", config_.domain},
                     {"rubric", prompts_->get("ec_rubric").text},
                     {"last_turn_response", response_text},
                     {"dialogue_history", history_text},
                     {"target_item", render_target(target)}});
    request.messages = {{"user", "Output the JSON object only."}};
    request.temperature = config_.temperature;
    request.response_schema = "ec_record";

    auto structured = gateway_->complete_structured(Role::Simulator, request, valid_ec_fields);
    return parse_ec_json(structured.value);
}

std::pair<std::string, std::string> Simulator::opening_utterance(const Persona& persona,
                                                                 const ItemRef& target) {
    if (config_.opener_mode == "template")
        return {"Hi! I'm looking for a good " + config_.domain +
                    " - can you help me find something I'll love?",
                "template"};
    CompletionRequest request;
    request.system_prompt = fill_prompt(prompts_->get("opener").text,
                                        {{"domain", config_.domain},
                                         {"persona", persona.render()},
                                         {"target", render_target(target)}});
    request.messages = {{"user", "Output the message text only."}};
    request.temperature = config_.temperature;
    std::string text = trim(gateway_->complete(Role::Simulator, request));
    if (contains_normalized(text, target.title)) text = redact_title(text, target.title);
    return {text, "generated"};
}

PersonaBuildResult build_personas(const Catalog& catalog, Gateway& gateway,
                                  const PromptRegistry& prompts, int n,
                                  const PersonaBuildConfig& config) {
    PersonaBuildResult result;
    std::vector<std::string> eligible;
    for (const auto& [user, reviews] : catalog.user_reviews) {
        if (static_cast<int>(reviews.size()) >= config.min_reviews) {
            eligible.push_back(user);
        } else {
            ++result.skipped_users;
            result.log.push_back("skipped user " + user + ": only " +
                                 std::to_string(reviews.size()) + " reviews (minimum " +
                                 std::to_string(config.min_reviews) + ")");
        }
    }
    Rng rng(config.seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    if (static_cast<int>(eligible.size()) > n) eligible.resize(static_cast<std::size_t>(n));
    std::sort(eligible.begin(), eligible.end());
    if (static_cast<int>(eligible.size()) < n)
        result.log.push_back("only " + std::to_string(eligible.size()) +
                             " users eligible for " + std::to_string(n) + " personas");

    for (const auto& user : eligible) {
        const auto& reviews = catalog.user_reviews.at(user);
        std::ostringstream review_block;
        std::vector<std::string> source_ids;
        int used = 0;
        for (std::size_t i = 0; i < reviews.size() && used < config.max_reviews_per_prompt;
             ++i, ++used) {
            std::string text = reviews[i].review_text.substr(0, 400);
            review_block << "- [" << reviews[i].title << "] " << text << "\n";
            source_ids.push_back(user + "#" + std::to_string(i));
        }

        CompletionRequest request;
        request.system_prompt = fill_prompt(
            prompts.get("persona_infer").text,
            {{"domain", config.domain}, {"reviews", trim(review_block.str())}});
        request.messages = {{"user", "Output the JSON object only."}};
        request.response_schema = "persona";

        auto structured = gateway.complete_structured(Role::Simulator, request);
        Persona persona;
        persona.id = user;
        persona.activities = structured.value.at("activities").get<std::vector<std::string>>();
        persona.interests = structured.value.at("interests").get<std::vector<std::string>>();
        persona.language_style = structured.value.at("language_style").get<std::string>();
        persona.orientations = structured.value.at("orientations").get<std::string>();
        persona.source_reviews = std::move(source_ids);
        if (!persona.complete())
            throw SchemaError("persona for user " + user + " has an empty AIO dimension");
        result.personas.push_back(std::move(persona));
    }
    return result;
}

DiversityReport persona_diversity(const std::vector<Persona>& personas, int sample,
                                  std::uint64_t seed) {
    if (personas.size() < 2) throw EcpoError("persona diversity needs at least 2 personas");
    std::vector<std::size_t> indices(personas.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    Rng rng(seed);
    std::shuffle(indices.begin(), indices.end(), rng);
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(std::max(sample, 2)),
                                             indices.size());
    indices.resize(take);

    std::vector<std::string> rendered;
    rendered.reserve(take);
    for (auto idx : indices) rendered.push_back(personas[idx].render());

    DiversityReport report;
    std::vector<double> scores;
    for (std::size_t i = 0; i < take; ++i) {
        double best = 0.0;
        for (std::size_t j = 0; j < take; ++j) {
            if (i == j) continue;
            best = std::max(best, rouge_l(rendered[i], rendered[j]));
        }
        report.max_scores.emplace_back(personas[indices[i]].id, best);
        scores.push_back(best);
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    report.min = sorted.front();
    report.max = sorted.back();
    report.median = take % 2 == 1 ? sorted[take / 2]
                                  : 0.5 * (sorted[take / 2 - 1] + sorted[take / 2]);
    double sum = 0.0;
    for (double s : scores) sum += s;
    report.mean = sum / static_cast<double>(take);
    return report;
}

json DiversityReport::to_json() const {
    json scores = json::array();
    for (const auto& [id, score] : max_scores)
        scores.push_back({{"persona_id", id}, {"max_rouge_l", score}});
    return {{"count", max_scores.size()}, {"mean", mean},     {"min", min},
            {"max", max},                 {"median", median}, {"scores", scores}};
}

}  // namespace ecpo

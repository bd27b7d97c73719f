#include "ecpo/gateway.hpp"

#include <sstream>

namespace ecpo {

using nlohmann::json;

std::string to_string(Role role) {
    switch (role) {
        case Role::Agent: return "agent";
        case Role::Simulator: return "simulator";
        case Role::Rewriter: return "rewriter";
        case Role::Judge: return "judge";
        case Role::Embedder: return "embedder";
    }
    return "agent";
}

std::string request_fingerprint_text(const CompletionRequest& request) {
    std::ostringstream ss;
    ss << "system:" << request.system_prompt << "\x1e";
    for (const auto& m : request.messages) ss << m.role << ":" << m.text << "\x1e";
    ss << "temperature:" << request.temperature;
    return ss.str();
}

std::uint64_t request_fingerprint(const CompletionRequest& request) {
    return fnv1a(request_fingerprint_text(request));
}

std::uint64_t CallLedger::total() const {
    std::uint64_t sum = 0;
    for (const auto& c : counters_) sum += c.load(std::memory_order_relaxed);
    return sum;
}

void CallLedger::reset() {
    for (auto& c : counters_) c.store(0, std::memory_order_relaxed);
    for (auto& c : repairs_) c.store(0, std::memory_order_relaxed);
}

std::map<std::string, std::uint64_t> CallLedger::snapshot() const {
    std::map<std::string, std::uint64_t> out;
    for (Role role : {Role::Agent, Role::Simulator, Role::Rewriter, Role::Judge,
                      Role::Embedder})
        out[to_string(role)] = count(role);
    return out;
}

json CallLedger::to_json() const {
    json j = json::object();
    for (const auto& [role, n] : snapshot()) j[role] = n;
    json r = json::object();
    for (Role role : {Role::Agent, Role::Simulator, Role::Rewriter, Role::Judge,
                      Role::Embedder})
        r[to_string(role)] = repair_attempts(role);
    j["repair_attempts"] = r;
    return j;
}

const char* const kRepairInstruction =
    "Your previous reply was not valid JSON for the requested schema. "
    "Reply again with exactly one JSON object and no surrounding prose.";

namespace {

const std::map<std::string, std::vector<std::string>>& schema_registry() {
    static const std::map<std::string, std::vector<std::string>> registry = {
        {"actcrs_step", {"strategy", "reasoning", "action"}},
        {"simulator_turn", {"policy", "utterance", "ec"}},
        {"sim_policy", {"policy"}},
        {"sim_utterance", {"utterance"}},
        {"ec_record",
         {"reason", "flexibility_deduction", "coherence_deduction", "guidance_deduction",
          "rating"}},
        {"rewrite", {"reason", "refinement"}},
        {"judge_verdict", {"Flexibility", "Coherence", "User Guidance", "Final Score"}},
        {"persona", {"activities", "interests", "language_style", "orientations"}},
    };
    return registry;
}

}  // namespace

const std::vector<std::string>& schema_required_keys(const std::string& schema) {
    auto it = schema_registry().find(schema);
    if (it == schema_registry().end()) throw ConfigError("unknown response schema: " + schema);
    return it->second;
}

bool validate_schema(const json& j, const std::string& schema) {
    if (!j.is_object()) return false;
    for (const auto& key : schema_required_keys(schema))
        if (!j.contains(key)) return false;
    return true;
}

json extract_json_object(const std::string& text) {
    std::size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                --depth;
                if (depth == 0) {
                    try {
                        return json::parse(text.substr(start, i - start + 1));
                    } catch (const json::exception&) {
                        break;  // balanced but invalid; try the next '{'
                    }
                }
            }
        }
        start = text.find('{', start + 1);
    }
    throw ParseError("no JSON object found in model output");
}

std::string Gateway::complete(Role role, const CompletionRequest& request) {
    if (request.temperature < 0.0) throw ConfigError("temperature must be >= 0");
    ledger_.record(role);
    return provider_->complete(request);
}

StructuredResult Gateway::complete_structured(
    Role role, const CompletionRequest& request,
    const std::function<bool(const json&)>& validator) {
    if (request.response_schema.empty())
        throw ConfigError("complete_structured requires response_schema");
    schema_required_keys(request.response_schema);  // fail fast on unknown tag

    CompletionRequest attempt_request = request;
    std::string last_raw;
    for (int attempt = 1; attempt <= repair_retries_ + 1; ++attempt) {
        std::string raw = complete(role, attempt_request);
        last_raw = raw;
        try {
            json parsed = extract_json_object(raw);
            if (validate_schema(parsed, request.response_schema) &&
                (!validator || validator(parsed)))
                return StructuredResult{std::move(parsed), attempt};
        } catch (const ParseError&) {
            // fall through to repair
        }
        if (attempt <= repair_retries_) {
            ledger_.record_repair(role);
            attempt_request.messages.push_back({"assistant", raw});
            attempt_request.messages.push_back({"user", kRepairInstruction});
        }
    }
    throw StructuredOutputError(
        "structured output failed schema '" + request.response_schema + "' after " +
            std::to_string(repair_retries_ + 1) + " attempts",
        last_raw);
}

}  // namespace ecpo

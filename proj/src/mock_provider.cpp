#include "ecpo/mock_provider.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ecpo/prompts.hpp"
#include "ecpo/types.hpp"

namespace ecpo {

using nlohmann::json;

ScriptedBehavior ScriptedBehavior::from_json(const json& j) {
    ScriptedBehavior b;
    if (j.contains("rules")) {
        for (const auto& r : j.at("rules")) {
            ScriptedRule rule;
            rule.pattern = r.at("match").get<std::string>();
            const auto& resp = r.at("response");
            rule.response = resp.is_string() ? resp.get<std::string>() : resp.dump();
            b.rules.push_back(std::move(rule));
        }
    }
    if (j.contains("fallback")) b.fallback = j.at("fallback").get<std::string>();
    b.auto_synthesize = j.value("auto", true);
    return b;
}

ScriptedBehavior ScriptedBehavior::from_file(const std::filesystem::path& path) {
    return from_json(json::parse(read_file(path)));
}

namespace {

std::string full_text(const CompletionRequest& request) {
    std::string out = request.system_prompt;
    for (const auto& m : request.messages) {
        out += "\n";
        out += m.text;
    }
    return out;
}

// Text between `after` (exclusive) and the next occurrence of `before`; when
// `before` is missing the tail is returned.
std::string text_between(const std::string& text, std::string_view after,
                         std::string_view before) {
    std::size_t start = text.find(after);
    if (start == std::string::npos) return "";
    start += after.size();
    std::size_t end = before.empty() ? std::string::npos : text.find(before, start);
    if (end == std::string::npos) return trim(text.substr(start));
    return trim(text.substr(start, end - start));
}

std::string last_line_starting(const std::string& text, std::string_view prefix) {
    std::istringstream in(text);
    std::string line, found;
    while (std::getline(in, line))
        if (starts_with(line, prefix)) found = line.substr(prefix.size());
    return trim(found);
}

bool is_stopword(const std::string& w) {
    static const std::set<std::string> kStop = {
        "the",  "and",  "for",   "with", "that", "this", "from", "have", "about",
        "what", "your", "would", "like", "some", "more", "into", "them", "they",
        "been", "were", "you",   "are",  "was",  "but",  "not",  "all",  "can",
        "its",  "it's", "i'm",   "really"};
    return kStop.count(to_lower(w)) > 0;
}

std::vector<std::string> content_tokens(const std::string& text, std::size_t max_count,
                                        std::size_t min_len = 4) {
    std::vector<std::string> out;
    for (const auto& tok : tokenize_lower(normalize_text(text))) {
        if (tok.size() < min_len || is_stopword(tok)) continue;
        if (std::find(out.begin(), out.end(), tok) == out.end()) out.push_back(tok);
        if (out.size() >= max_count) break;
    }
    return out;
}

std::vector<std::string> result_titles(const std::string& block) {
    std::vector<std::string> titles;
    std::istringstream in(block);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (!starts_with(line, "- ")) continue;
        std::size_t sep = line.find(" :: ");
        titles.push_back(sep == std::string::npos ? line.substr(2)
                                                  : trim(line.substr(2, sep - 2)));
    }
    return titles;
}

json make_agent_output(const std::string& strategy, const std::string& reasoning,
                       const Action& action) {
    return {{"strategy", strategy}, {"reasoning", reasoning}, {"action", action.render()}};
}

}  // namespace

namespace mockgen {

std::vector<std::string> hint_words(const std::string& title) {
    auto tokens = tokenize_lower(normalize_text(title));
    std::vector<std::string> candidates;
    for (const auto& t : tokens)
        if (t.size() > 3 && !is_stopword(t)) candidates.push_back(t);
    if (candidates.empty()) candidates = tokens;
    // Longest tokens are the most distinctive; keep the original order on ties.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
    if (candidates.size() > 2) candidates.resize(2);
    // A single-token title would leak verbatim; degrade to a truncated stem.
    if (tokens.size() == 1 && !candidates.empty() && candidates[0].size() > 4)
        candidates[0] = candidates[0].substr(0, candidates[0].size() - 2);
    return candidates;
}

std::string agent_step(const CompletionRequest& request) {
    const std::string text = full_text(request);
    const std::string& last = request.messages.empty() ? text : request.messages.back().text;

    if (last.find(kMarkerAgentObservation) != std::string::npos) {
        std::string block = text_between(last, kMarkerAgentObservation, "These items were");
        auto titles = result_titles(block);
        if (titles.empty())
            return make_agent_output(
                       "recover", "The search returned nothing useful; ask for more detail.",
                       {ActionKind::Ask,
                        "I could not find a match yet - could you describe what you want in "
                        "different words?"})
                .dump();
        // Skip items this conversation already recommended.
        std::string state = text_between(text, "Conversation so far:\n", "\nDecide your next");
        std::vector<std::string> fresh;
        for (const auto& t : titles)
            if (state.find("Recommend[") == std::string::npos ||
                !contains_normalized(state, t))
                fresh.push_back(t);
        if (fresh.empty()) fresh = titles;
        if (fresh.size() > 3) fresh.resize(3);
        std::string payload = join(fresh, "; ") + " - based on what you described, " +
                              (fresh.size() > 1 ? "these could fit." : "this could fit.");
        return make_agent_output("recommend from results",
                                 "The retrieved items overlap the stated preferences.",
                                 {ActionKind::Recommend, payload})
            .dump();
    }

    std::string state = text_between(last, "Conversation so far:\n", "\nDecide your next");
    std::size_t user_turns = 0;
    for (std::size_t pos = state.find("user: "); pos != std::string::npos;
         pos = state.find("user: ", pos + 1))
        ++user_turns;

    if (user_turns <= 1)
        return make_agent_output(
                   "clarify preferences",
                   "Only the opener is known; narrow the request before searching.",
                   {ActionKind::Ask,
                    "Could you tell me a bit more about what you're looking for - any "
                    "particular themes, style, or mood?"})
            .dump();

    std::string last_user = last_line_starting(state, "user: ");
    // An occasional extra clarifying turn keeps outcomes mixed.
    if (user_turns >= 2 && fnv1a(state) % 4 == 0)
        return make_agent_output("probe",
                                 "Another detail could sharpen the search query.",
                                 {ActionKind::Ask,
                                  "Is there anything else that matters to you, like tone, "
                                  "pacing, or setting?"})
            .dump();

    auto keywords = content_tokens(last_user, 4);
    if (keywords.empty()) keywords.push_back("recommendation");
    return make_agent_output("search the catalog",
                             "The user named concrete preferences; query the database.",
                             {ActionKind::Search, join(keywords, " ")})
        .dump();
}

void synth_deductions(const std::string& response, const std::string& history, int& flex,
                      int& coh, int& guide) {
    std::uint64_t h = fnv1a(response, fnv1a(history));
    flex = static_cast<int>(h % 3);
    coh = static_cast<int>((h >> 8) % 3);
    guide = static_cast<int>((h >> 16) % 2);
    // Verbatim repetition of an earlier agent message is a logical
    // inconsistency by the rubric.
    if (!response.empty() && history.find(response) != std::string::npos)
        coh = std::max(coh, 1);
}

namespace {

std::string deduction_reason(int flex, int coh, int guide) {
    std::vector<std::string> issues;
    if (flex == 2) issues.push_back("the reply ignored my change of direction entirely");
    else if (flex == 1) issues.push_back("the reply adapted to my request only stiffly");
    if (coh == 2) issues.push_back("it repeated itself and broke the conversation flow");
    else if (coh == 1) issues.push_back("it connected only loosely to what I said before");
    if (guide == 1) issues.push_back("it gave me no productive next step");
    if (issues.empty())
        return "The response adapted to my request, stayed consistent with the "
               "conversation and guided me forward; no deductions.";
    std::string out = "Deductions because ";
    for (std::size_t i = 0; i < issues.size(); ++i) {
        if (i) out += i + 1 == issues.size() ? " and " : ", ";
        out += issues[i];
    }
    return out + ".";
}

json ec_json(const std::string& response, const std::string& history) {
    int flex = 0, coh = 0, guide = 0;
    synth_deductions(response, history, flex, coh, guide);
    return {{"reason", deduction_reason(flex, coh, guide)},
            {"flexibility_deduction", flex},
            {"coherence_deduction", coh},
            {"guidance_deduction", guide},
            {"rating", 5 - flex - coh - guide}};
}

}  // namespace

namespace {

// Shared input parse for the one-call and three-call simulator prompts.
struct SimInputs {
    std::string title;
    std::string history;
    std::string response;
    bool accepted = false;
};

SimInputs parse_sim_inputs(const std::string& text) {
    SimInputs in;
    std::string target_line = text_between(text, "recommends it:\n", "\nDo not state");
    if (target_line.empty()) target_line = text_between(text, "recommends it:\n", "\n\nDialogue");
    in.title = target_line.substr(0, target_line.find(" :: "));
    in.history = text_between(text, "Dialogue history:\n", "\nSystem's last response:");
    in.response = last_line_starting(text, "System's last response: ");
    try {
        Action action = parse_action(in.response);
        in.accepted = action.kind == ActionKind::Recommend &&
                      recommend_matches(action.payload, in.title);
    } catch (const ParseError&) {
        in.accepted = false;
    }
    return in;
}

std::string pick_policy(const SimInputs& in) {
    if (in.accepted) return "Accepting the Recommendation";
    std::uint64_t h = fnv1a(in.response, fnv1a(in.history));
    static const char* kPolicies[] = {"Providing More Details", "Asking for Recommendations",
                                      "Expressing Dissatisfaction"};
    return kPolicies[(h >> 24) % 3];
}

std::string pick_utterance(const SimInputs& in, const std::string& policy) {
    if (in.accepted)
        return "That sounds perfect - " + in.title + " is exactly what I was hoping for. "
               "Thank you!";
    auto hints = hint_words(in.title);
    std::string hint = hints.empty() ? "something different" : join(hints, " and ");
    if (policy == "Providing More Details")
        return "To narrow it down, I'm really drawn to " + hint + ".";
    if (policy == "Asking for Recommendations")
        return "Could you suggest something built around " + hint + "?";
    return "That's not quite it - I wanted something closer to " + hint + ".";
}

}  // namespace

std::string sim_policy(const CompletionRequest& request) {
    SimInputs in = parse_sim_inputs(full_text(request));
    return json{{"policy", pick_policy(in)}}.dump();
}

std::string sim_utterance(const CompletionRequest& request) {
    const std::string text = full_text(request);
    SimInputs in = parse_sim_inputs(text);
    std::string policy = last_line_starting(text, "Your response policy: ");
    return json{{"utterance", pick_utterance(in, policy)}}.dump();
}

std::string simulator_turn(const CompletionRequest& request) {
    SimInputs in = parse_sim_inputs(full_text(request));
    std::string policy = pick_policy(in);
    std::string utterance = pick_utterance(in, policy);
    json ec;
    if (in.accepted)
        ec = {{"reason",
               "The recommendation matches exactly what I was hoping for; the system "
               "adapted to my hints and guided the conversation well."},
              {"flexibility_deduction", 0},
              {"coherence_deduction", 0},
              {"guidance_deduction", 0},
              {"rating", 5}};
    else
        ec = ec_json(in.response, in.history);
    return json{{"policy", policy}, {"utterance", utterance}, {"ec", ec}}.dump();
}

std::string ec_confirm(const CompletionRequest& request) {
    const std::string text = full_text(request);
    std::string response = last_line_starting(text, "System's Last Response: ");
    std::string history = text_between(text, "Dialogue History: ", "\nTarget:");
    return ec_json(response, history).dump();
}

std::string rewrite(const CompletionRequest& request) {
    const std::string text = full_text(request);
    std::string original =
        text_between(text, "Original Response: ", "\nFeedback on Flaws:");
    std::string feedback = text_between(text, "Feedback on Flaws: ", "\n\nOutput Format:");
    std::string lower_feedback = to_lower(feedback);

    Action action;
    try {
        action = parse_action(original);
    } catch (const ParseError&) {
        action = {ActionKind::Response, original.empty() ? "(empty)" : original};
    }

    std::vector<std::string> fixes;
    std::string payload = action.payload;
    if (lower_feedback.find("ignored") != std::string::npos ||
        lower_feedback.find("stiffly") != std::string::npos ||
        lower_feedback.find("flexib") != std::string::npos) {
        payload = "Picking up on what you just said - " + payload;
        fixes.push_back("acknowledged the user's latest shift in intent");
    }
    if (lower_feedback.find("repeated") != std::string::npos ||
        lower_feedback.find("loosely") != std::string::npos ||
        lower_feedback.find("coheren") != std::string::npos) {
        payload += " To avoid going in circles, here is a different angle.";
        fixes.push_back("tied the reply back to the earlier context without repetition");
    }
    if (lower_feedback.find("next step") != std::string::npos ||
        lower_feedback.find("guidance") != std::string::npos) {
        payload += " Which of these directions should we explore next?";
        fixes.push_back("added a concrete next step for the user");
    }
    if (fixes.empty()) {
        payload += " Does that match what you had in mind?";
        fixes.push_back("closed with an explicit check-in to keep the user engaged");
    }

    std::string reason = "Kept the original " + to_string(action.kind) + " intent and ";
    for (std::size_t i = 0; i < fixes.size(); ++i) {
        if (i) reason += i + 1 == fixes.size() ? " and " : ", ";
        reason += fixes[i];
    }
    reason += ".";
    return json{{"reason", reason}, {"refinement", Action{action.kind, payload}.render()}}
        .dump();
}

std::string judge(const CompletionRequest& request) {
    const std::string text = full_text(request);
    std::string a = text_between(text, "Trajectory A: ", "\n\nTrajectory B: ");
    std::string b = text_between(text, "Trajectory B: ", "\n\nPlease provide a score");

    auto dim = [&](std::uint64_t salt) -> int {
        std::uint64_t qa = fnv1a(a, salt);
        std::uint64_t qb = fnv1a(b, salt);
        if (qa == qb) return 0;
        return qa > qb ? 1 : -1;
    };
    int flex = dim(0x11), coh = dim(0x22), guide = dim(0x33);
    int sum = flex + coh + guide;
    int final_score = sum == 0 ? 0 : (sum > 0 ? 1 : -1);
    auto entry = [](int score) {
        const char* reason = score == 0  ? "Both trajectories perform comparably."
                             : score > 0 ? "Trajectory A handles this dimension better."
                                         : "Trajectory B handles this dimension better.";
        return json{{"Reason", reason}, {"Score", score}};
    };
    return json{{"Flexibility", entry(flex)},
                {"Coherence", entry(coh)},
                {"User Guidance", entry(guide)},
                {"Final Score", final_score}}
        .dump();
}

std::string persona(const CompletionRequest& request) {
    const std::string text = full_text(request);
    std::string domain = text_between(text, "when choosing ", " items");
    if (domain.empty()) domain = "catalog";
    std::string reviews = text_between(text, "Reviews:\n", "\n\nOutput strictly");

    auto interests = content_tokens(reviews, 4, 5);
    if (interests.empty()) interests.push_back(domain + " discoveries");

    std::uint64_t h = fnv1a(reviews);
    static const char* kStyles[] = {
        "Writes short enthusiastic sentences with plenty of exclamation points.",
        "Measured and precise, prefers complete sentences and concrete detail.",
        "Casual and chatty, asks questions back and uses colloquial phrasing."};
    static const char* kOrientations[] = {
        "Values quick, efficient recommendations over long discussions.",
        "Enjoys in-depth discussion of specifics before committing to anything.",
        "Wants recommendations to feel personal and grounded in stated tastes."};
    json j = {{"activities",
               json::array({"exploring new " + domain + " releases",
                            "writing detailed reviews of " + domain + " purchases"})},
              {"interests", interests},
              {"language_style", kStyles[h % 3]},
              {"orientations", kOrientations[(h >> 16) % 3]}};
    return j.dump();
}

std::string opener(const CompletionRequest& request) {
    const std::string text = full_text(request);
    std::string domain = text_between(text, "conversation with a ", " recommendation system");
    if (domain.empty()) domain = "catalog";
    std::string target_line =
        text_between(text, "You are privately looking for:\n", "\nWrite one short");
    std::string title = target_line.substr(0, target_line.find(" :: "));
    auto hints = hint_words(title);
    std::string hint = hints.empty() ? "something new" : join(hints, " and ");
    return "I'm in the mood for a " + domain + " built around " + hint +
           " - what would you suggest?";
}

}  // namespace mockgen

std::string MockProvider::complete(const CompletionRequest& request) {
    const std::string fingerprint = request_fingerprint_text(request);
    for (const auto& rule : behavior_.rules)
        if (pattern_match(rule.pattern, fingerprint)) return rule.response;
    if (behavior_.fallback) return *behavior_.fallback;
    if (behavior_.auto_synthesize) {
        const std::string& sys = request.system_prompt;
        const std::string text = full_text(request);
        // Specific markers first: the opener and three-call prompts also
        // open with the generic simulator phrase.
        if (sys.find(kMarkerAgent) != std::string::npos) return mockgen::agent_step(request);
        if (sys.find(kMarkerOpener) != std::string::npos) return mockgen::opener(request);
        if (sys.find(kMarkerSimPolicy) != std::string::npos)
            return mockgen::sim_policy(request);
        if (sys.find(kMarkerSimUtterance) != std::string::npos)
            return mockgen::sim_utterance(request);
        if (sys.find(kMarkerSimulator) != std::string::npos)
            return mockgen::simulator_turn(request);
        if (sys.find(kMarkerEcConfirm) != std::string::npos)
            return mockgen::ec_confirm(request);
        if (sys.find(kMarkerRewrite) != std::string::npos) return mockgen::rewrite(request);
        if (text.find(kMarkerJudge) != std::string::npos) return mockgen::judge(request);
        if (sys.find(kMarkerPersona) != std::string::npos) return mockgen::persona(request);
    }
    throw GatewayError("mock provider: no rule matched and no fallback configured");
}

}  // namespace ecpo

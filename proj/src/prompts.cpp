#include "ecpo/prompts.hpp"

#include <algorithm>

namespace ecpo {

namespace {

const char* kActcrsAgent = R"(You are ActCRS, a {domain} conversational recommendation agent. In every turn you simultaneously decide a response strategy and the corresponding response.

You interact with the user and the environment by taking exactly one of four actions:
- Ask[Question]: ask the user a clarifying question about their preferences.
- Recommend[Answer]: recommend one or more concrete items by name, with a short pitch. Name at most {max_recommendations} items.
- Response[Content]: reply to the user without asking or recommending.
- Search[Keyword]: query the item database with a short keyword string. Search results are returned to you as an observation before the user sees anything.

Ground recommendations in search results; do not invent items. Guide the user proactively, adapt to changes in their requests, and keep the conversation coherent.

Output strictly one JSON object:
{
  "strategy": "<short label for your response strategy>",
  "reasoning": "<your internal reasoning for this turn>",
  "action": "<Ask[...], Recommend[...], Response[...] or Search[...]>"
})";

const char* kAgentTurn = R"(Conversation so far:
{state}
Decide your next step. Output the JSON object only.)";

const char* kAgentObservation = R"(Search observation:
{results}
These items were retrieved for your query. Now produce the user-facing action for this turn (Ask, Recommend or Response; do not search again). Output the JSON object only.)";

const char* kSimulatorTurn = R"(You are simulating a user in a conversation with a {domain} recommendation system. Stay in character; never act as the assistant.

Your persona:
{persona}
You are privately looking for this exact item, and you will only be satisfied when the system recommends it:
{target}
Do not state the item's name yourself; describe what you want in your own words and react to what the system says.

Proceed in three steps:
1. Response Policy Generation: based on your persona and the system's last response, decide your response policy (for example "Asking for Recommendations", "Providing More Details", "Expressing Dissatisfaction", "Accepting the Recommendation").
2. Response Content Generation: write your next utterance following that policy, in your persona's voice.
3. Expectation Confirmation: evaluate the system's last response against your expectations using the scoring rubric below, and report the deductions.

{rubric}

Dialogue history:
{history}
System's last response: {last_turn_response}

Output strictly one JSON object:
{
  "policy": "<your response policy>",
  "utterance": "<your next message to the system>",
  "ec": {
    "reason": "<why you are satisfied or dissatisfied, naming the specific issues that caused point deductions>",
    "flexibility_deduction": <0, 1 or 2>,
    "coherence_deduction": <0, 1 or 2>,
    "guidance_deduction": <0 or 1>,
    "rating": <final score from 0 to 5>
  }
})";

const char* kSimulatorPolicy = R"(You are simulating a user in a conversation with a {domain} recommendation system; decide only your response policy for this turn.

Your persona:
{persona}
You are privately looking for this exact item, and you will only be satisfied when the system recommends it:
{target}

Dialogue history:
{history}
System's last response: {last_turn_response}

Output strictly one JSON object:
{
  "policy": "<your response policy, e.g. \"Asking for Recommendations\" or \"Accepting the Recommendation\">"
})";

const char* kSimulatorUtterance = R"(You are simulating a user in a conversation with a {domain} recommendation system; write only your next utterance, following the response policy you already chose.

Your persona:
{persona}
You are privately looking for this exact item, and you will only be satisfied when the system recommends it:
{target}
Do not state the item's name yourself.

Dialogue history:
{history}
System's last response: {last_turn_response}
Your response policy: {policy}

Output strictly one JSON object:
{
  "utterance": "<your next message to the system>"
})";

// Scoring rubric shared by the in-dialogue EC step and the standalone
// confirmation instruction.
const char* kEcRubric = R"(Evaluation Dimensions:
Flexibility: How well does the system adapt its responses to changes in user requests or shifts in the conversation flow?
  Score Range: 0 to -2 points
  Deductions:
    -2 points: The system fails to recognize and respond to the user's change in intent or request, resulting in a rigid, non-adaptive response.
    -1 point: The system identifies the change in intent but responds in a delayed, overly rigid, or awkward manner.
    0 points: The system fully adapts to changes in user requests, showing natural flexibility in its responses.
Coherence: How consistent and fluid is the dialogue? Does the system remember context and respond appropriately to the user's input?
  Score Range: 0 to -2 points
  Deductions:
    -2 points: The response contradicts the dialogue context or repeats itself, with logical inconsistencies that break the conversation flow.
    -1 point: The response is loosely connected to the context, with minor inconsistencies or awkward transitions.
    0 points: The response is fully consistent with the context and keeps the dialogue fluid.
User Guidance: How well does the system guide the user, clarify requests, or steer the conversation in a productive direction?
  Score Range: 0 to -1 points
  Deductions:
    -1 point: The response gives the user no direction, leaving the conversation without a productive next step.
    0 points: The response guides the user or moves the conversation toward a useful recommendation.

Scoring Method:
1. The initial score is 5 points (Flexibility = 2, Coherence = 2, User Guidance = 1).
2. Points are deducted based on the criteria outlined above for each dimension.
3. Final Score = 5 - (Flexibility deductions) - (Coherence deductions) - (User Guidance deductions)
Score Range: 0 to 5 points (higher score indicates better expressiveness and interactivity).)";

const char* kEcConfirm = R"(You are a user simulator, and your task is to evaluate the expressiveness and interaction quality of the {domain} conversational recommendation system in its last interaction. Your evaluation should focus on how well the system's response supports the dialogue flow, user engagement, and natural communication.

{rubric}

Feedback Requirement:
1. Provide a reason for the score, referencing specific aspects of the system's expressiveness (e.g., its flexibility, coherence, and user guidance).
2. Highlight any specific user reactions (e.g., confusion, frustration, or engagement) that support the score.
3. Clearly mention the specific issues that caused point deductions, such as rigid responses, logical inconsistencies, or lack of guidance.

Inputs:
System's Last Response: {last_turn_response}
Dialogue History: {dialogue_history}
Target: {target_item}

Output the results strictly in the following JSON format:
{
  "reason": "<The reason for the score, referencing specific aspects of the system's expressiveness, including its flexibility, coherence, and user guidance. Mention the specific issues that led to deductions.>",
  "flexibility_deduction": <0, 1 or 2>,
  "coherence_deduction": <0, 1 or 2>,
  "guidance_deduction": <0 or 1>,
  "rating": <final rating from 0 to 5>
})";

const char* kRewrite = R"(You are a rewrite model, and your task is to improve the system's response in a conversational recommendation agent (CRS). The CRS solves the task by interleaving "Observation" and "Action" steps. Observations include user requests, replies, or search results retrieved by the CRS. The CRS interacts with the user and the environment by taking one of the following four actions: Ask[Question], Recommend[Answer], Response[Content] or Search[Keyword].

Inputs Provided:
- Scratchpad: The agent's previous interaction history.
- Original Response: The system's original response that needs improvement.
- Feedback on Flaws: Specific feedback on identified weaknesses in Flexibility, Coherence, and User Guidance.

Task:
Your goal is to generate a rewritten response that specifically addresses the identified flaws in Flexibility, Coherence, and User Guidance.

Rewrite Strategy:
- Targeted Flaw Fixing: Use feedback on flexibility, coherence, and user guidance as a blueprint for improvements.
- Context-Aware Rewriting: Use the conversation history to ensure the response maintains logical flow, context relevance, and user intent alignment.
- Limited Modification: Make only limited modifications to the original response rather than a complete rewrite; preserve its action type and intent wherever the feedback allows.

First think through the flaws step by step, then produce the refined response.

Inputs:
Scratchpad: {scratchpad}
Original Response: {original_response}
Feedback on Flaws: {feedback_flaws}

Output Format:
Please output the results strictly in the following JSON format:
{
  "reason": "<Reason for refinement, referencing flexibility, coherence, and user guidance improvements.>",
  "refinement": "<Rewritten response (Ask[Question], Recommend[Answer], Response[Content] or Search[Keyword])>"
})";

const char* kJudge = R"(You are provided with two dialogue trajectories for comparison. Evaluate each dialogue system using the following criteria:

1. Flexibility: How well does the system adapt to changes in user requests or shifts in conversation flow?
  1: A is more flexible.
  -1: B is more flexible.
  0: Both are equally flexible.

2. Coherence: How consistent and fluid is the dialogue? Does the system remember context and respond appropriately to the user's input?
  1: A is more coherent.
  -1: B is more coherent.
  0: Both are equally coherent.

3. User Guidance: How well does the system guide the user, clarify requests, or steer the conversation in a productive direction?
  1: A provides better guidance.
  -1: B provides better guidance.
  0: Both provide similar levels of guidance.

4. Overall Evaluation: Based on the above three indicators, determine which trajectory is better.

Trajectory A: {traj_a}

Trajectory B: {traj_b}

Please provide a score of 1, -1, or 0 based on the comparison. After scoring, output the result in the following pure JSON format:
{
  "Flexibility": {
    "Reason": "<reason>",
    "Score": -1 or 1 or 0
  },
  "Coherence": {
    "Reason": "<reason>",
    "Score": -1 or 1 or 0
  },
  "User Guidance": {
    "Reason": "<reason>",
    "Score": -1 or 1 or 0
  },
  "Final Score": -1 or 1 or 0
})";

const char* kPersonaInfer = R"(You are a consumer-insight analyst. From the product reviews below, infer a realistic user persona along four dimensions: Activities (what the user does), Interests (what the user cares about), Language (how the user writes and talks) and Orientations (what the user values when choosing {domain} items, e.g. efficiency vs. in-depth discussion).

Ground every dimension in the reviews; do not invent traits the reviews cannot support.

Reviews:
{reviews}

Output strictly one JSON object:
{
  "activities": ["<activity>", ...],
  "interests": ["<interest>", ...],
  "language_style": "<one-sentence description of the user's voice>",
  "orientations": "<what this user values in recommendations>"
})";

const char* kOpener = R"(You are simulating a user about to start a conversation with a {domain} recommendation system; compose the opening message.

Your persona:
{persona}
You are privately looking for:
{target}
Write one short opening message describing what you are in the mood for, in your persona's voice. Hint at the kind of item you want without naming it. Output the message text only.)";

}  // namespace

PromptRegistry::PromptRegistry() {
    auto add = [this](const char* name, const char* text) {
        templates_[name] = PromptTemplate{name, "v1", text};
    };
    add("actcrs_agent", kActcrsAgent);
    add("agent_turn", kAgentTurn);
    add("agent_observation", kAgentObservation);
    add("simulator_turn", kSimulatorTurn);
    add("simulator_policy", kSimulatorPolicy);
    add("simulator_utterance", kSimulatorUtterance);
    add("ec_rubric", kEcRubric);
    add("ec_confirm", kEcConfirm);
    add("rewrite", kRewrite);
    add("judge", kJudge);
    add("persona_infer", kPersonaInfer);
    add("opener", kOpener);
}

const PromptRegistry& PromptRegistry::instance() {
    static PromptRegistry registry;
    return registry;
}

const PromptTemplate& PromptRegistry::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("unknown prompt template: " + name);
    return it->second;
}

std::vector<std::string> PromptRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

std::map<std::string, std::string> PromptRegistry::hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, tpl] : templates_) out[name] = hash_hex(tpl.hash());
    return out;
}

PromptRegistry PromptRegistry::with_overrides(const std::filesystem::path& dir) {
    PromptRegistry registry = instance();
    if (!std::filesystem::exists(dir)) throw ConfigError("prompt dir not found: " + dir.string());
    for (auto& [name, tpl] : registry.templates_) {
        auto candidate = dir / (name + ".txt");
        if (std::filesystem::exists(candidate)) {
            tpl.text = read_file(candidate);
            tpl.version = "override";
        }
    }
    return registry;
}

std::string fill_prompt(const std::string& text,
                        const std::map<std::string, std::string>& slots) {
    std::string out = text;
    for (const auto& [key, value] : slots) {
        std::string needle = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = out.find(needle, pos)) != std::string::npos) {
            out.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace ecpo

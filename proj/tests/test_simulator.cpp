#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ecpo/catalog.hpp"
#include "ecpo/mock_provider.hpp"
#include "ecpo/simulator.hpp"
#include "helpers.hpp"

using namespace ecpo;
using nlohmann::json;

namespace {

std::shared_ptr<MockProvider> auto_mock() {
    return std::make_shared<MockProvider>(ScriptedBehavior{});
}

Simulator make_simulator(Gateway& gateway, SimulatorConfig config = {}) {
    config.domain = "book";
    return Simulator(&gateway, &PromptRegistry::instance(), config);
}

DialogueState opener_state(const std::string& opener) {
    DialogueState s;
    s.history.push_back({"user", opener});
    s.turn_index = 1;
    return s;
}

}  // namespace

TEST_CASE("rouge-l reference values") {
    CHECK(rouge_l("the cat sat", "the cat sat") == doctest::Approx(1.0));
    CHECK(rouge_l("alpha beta", "gamma delta") == doctest::Approx(0.0));
    // LCS = 2, P = R = 2/3, F = 2/3.
    CHECK(rouge_l("the cat sat", "the dog sat") == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    // Case-insensitive, whitespace-tokenized.
    CHECK(rouge_l("The CAT sat", "the cat sat") == doctest::Approx(1.0));
}

TEST_CASE("rouge-l symmetry and identity properties over random pairs") {
    std::mt19937 rng(3);
    auto random_text = [&] {
        static const char* words[] = {"amber", "vivid", "quiet", "novel", "maps",
                                      "games", "fast",  "slow",  "deep",  "light"};
        std::string out;
        int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) {
            if (i) out += " ";
            out += words[rng() % 10];
        }
        return out;
    };
    for (int i = 0; i < 100; ++i) {
        std::string a = random_text(), b = random_text();
        double ab = rouge_l(a, b), ba = rouge_l(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(rouge_l(a, a) == doctest::Approx(1.0));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("persona diversity distribution") {
    auto persona = [](const std::string& id, const std::string& interests) {
        Persona p;
        p.id = id;
        p.activities = {"reading"};
        p.interests = {interests};
        p.language_style = "plain";
        p.orientations = "efficiency";
        return p;
    };

    SUBCASE("identical personas score 1.0") {
        auto report = persona_diversity({persona("a", "maps"), persona("b", "maps")}, 2);
        REQUIRE(report.max_scores.size() == 2);
        CHECK(report.max_scores[0].second == doctest::Approx(1.0));
        CHECK(report.mean == doctest::Approx(1.0));
    }

    SUBCASE("fewer than two personas errors") {
        CHECK_THROWS_AS(persona_diversity({persona("a", "maps")}, 1), EcpoError);
    }

    SUBCASE("sample clamps to population and stats are consistent") {
        std::vector<Persona> personas;
        for (int i = 0; i < 10; ++i)
            personas.push_back(persona("p" + std::to_string(i),
                                       "interest" + std::to_string(i)));
        auto report = persona_diversity(personas, 100);
        CHECK(report.max_scores.size() == 10);
        CHECK(report.min <= report.median);
        CHECK(report.median <= report.max);
    }
}

TEST_CASE("simulate_user happy path: accepted recommendation scores 5") {
    Gateway gateway(auto_mock());
    auto simulator = make_simulator(gateway);
    Persona persona{"u1", {"reading"}, {"gardens"}, "warm", "depth", {}};
    ItemRef target = ecpo::testing::make_item(4);

    auto result = simulator.simulate_user(
        persona, target, opener_state("I want a garden book"),
        {ActionKind::Recommend, target.title + " - a lovely fit."});
    CHECK(is_acceptance_policy(result.policy));
    CHECK(result.ec.score == 5);
    CHECK(result.ec.discrepancy == false);
    // Name may appear: the agent already recommended it.
    CHECK_FALSE(result.leak_redacted);
    CHECK(gateway.ledger().count(Role::Simulator) == 1);
}

TEST_CASE("deduction vector (1,0,1) yields score 3 through the parse path") {
    auto provider = std::make_shared<MockProvider>(ScriptedBehavior{
        {},
        std::string("{\"policy\": \"Providing More Details\", \"utterance\": \"more\", "
                    "\"ec\": {\"reason\": \"rigid and aimless\", "
                    "\"flexibility_deduction\": 1, \"coherence_deduction\": 0, "
                    "\"guidance_deduction\": 1, \"rating\": 3}}"),
        false});
    Gateway gateway(provider);
    auto simulator = make_simulator(gateway);
    Persona persona{"u1", {"a"}, {"b"}, "c", "d", {}};
    auto result = simulator.simulate_user(persona, ecpo::testing::make_item(1),
                                          opener_state("hi"), {ActionKind::Ask, "prefs?"});
    CHECK(result.ec.score == 3);
    CHECK(result.ec.flexibility_deduction == 1);
    CHECK(result.ec.guidance_deduction == 1);
}

TEST_CASE("repeated question draws a coherence deduction from the auto mock") {
    Gateway gateway(auto_mock());
    auto simulator = make_simulator(gateway);
    Persona persona{"u1", {"a"}, {"b"}, "c", "d", {}};
    ItemRef target = ecpo::testing::make_item(2);

    Action repeated{ActionKind::Ask, "What themes do you enjoy?"};
    DialogueState state = opener_state("I want something new");
    state.history.push_back({"agent", repeated.render()});
    state.history.push_back({"user", "I said: themes of memory"});
    state.turn_index = 2;

    auto result = simulator.simulate_user(persona, target, state, repeated);
    CHECK(result.ec.coherence_deduction >= 1);
}

TEST_CASE("confirm_expectation recomputes and flags a mis-stated total") {
    auto provider = std::make_shared<MockProvider>(ScriptedBehavior{
        {},
        std::string("{\"reason\": \"...\", \"flexibility_deduction\": 2, "
                    "\"coherence_deduction\": 0, \"guidance_deduction\": 0, "
                    "\"rating\": 4}"),
        false});
    Gateway gateway(provider);
    auto simulator = make_simulator(gateway);
    ECRecord ec = simulator.confirm_expectation(ecpo::testing::make_item(1), "user: hi\n",
                                                "Ask[what?]");
    CHECK(ec.score == 3);  // recomputed from deductions, not the stated 4
    CHECK(ec.discrepancy);
}

TEST_CASE("confirm_expectation perfect response") {
    auto provider = std::make_shared<MockProvider>(ScriptedBehavior{
        {},
        std::string("{\"reason\": \"adapts, coherent, guiding\", "
                    "\"flexibility_deduction\": 0, \"coherence_deduction\": 0, "
                    "\"guidance_deduction\": 0, \"rating\": 5}"),
        false});
    Gateway gateway(provider);
    auto simulator = make_simulator(gateway);
    ECRecord ec = simulator.confirm_expectation(ecpo::testing::make_item(1), "user: hi\n",
                                                "Ask[what matters most?]");
    CHECK(ec.score == 5);
    CHECK_FALSE(ec.discrepancy);

    // "rigid + no guidance": (2,0,1) -> 2.
    auto provider2 = std::make_shared<MockProvider>(ScriptedBehavior{
        {},
        std::string("{\"reason\": \"rigid, no direction\", \"flexibility_deduction\": 2, "
                    "\"coherence_deduction\": 0, \"guidance_deduction\": 1, \"rating\": 2}"),
        false});
    Gateway gateway2(provider2);
    auto simulator2 = make_simulator(gateway2);
    ECRecord ec2 = simulator2.confirm_expectation(ecpo::testing::make_item(1), "user: hi\n",
                                                  "Response[no.]");
    CHECK(ec2.score == 2);
}

TEST_CASE("target leak guard redacts premature reveals") {
    ItemRef target = ecpo::testing::make_item(9);
    auto provider = std::make_shared<MockProvider>(ScriptedBehavior{
        {},
        std::string("{\"policy\": \"Providing More Details\", \"utterance\": \"I want ") +
            target.title + " exactly\", \"ec\": {\"reason\": \"ok\", "
                           "\"flexibility_deduction\": 0, \"coherence_deduction\": 0, "
                           "\"guidance_deduction\": 0, \"rating\": 5}}",
        false});
    Gateway gateway(provider);
    auto simulator = make_simulator(gateway);
    Persona persona{"u1", {"a"}, {"b"}, "c", "d", {}};

    auto result = simulator.simulate_user(persona, target, opener_state("hi"),
                                          {ActionKind::Ask, "what do you want?"});
    CHECK(result.leak_redacted);
    CHECK_FALSE(contains_normalized(result.utterance, target.title));

    // Same reply after the agent recommended the item is not redacted.
    auto result2 = simulator.simulate_user(persona, target, opener_state("hi"),
                                           {ActionKind::Recommend, target.title + "!"});
    CHECK_FALSE(result2.leak_redacted);
}

TEST_CASE("three-call mode issues exactly three ordered simulator calls") {
    Gateway gateway(auto_mock());
    SimulatorConfig config;
    config.three_call_mode = true;
    auto simulator = make_simulator(gateway, config);
    Persona persona{"u1", {"a"}, {"b"}, "c", "d", {}};
    ItemRef target = ecpo::testing::make_item(3);

    auto result = simulator.simulate_user(persona, target, opener_state("hello there"),
                                          {ActionKind::Ask, "tastes?"});
    CHECK(gateway.ledger().count(Role::Simulator) == 3);
    CHECK_FALSE(result.policy.empty());
    CHECK_FALSE(result.utterance.empty());
    CHECK(result.ec.score >= 0);

    // Single-call mode performs exactly one.
    Gateway gateway2(auto_mock());
    auto simulator2 = make_simulator(gateway2);
    simulator2.simulate_user(persona, target, opener_state("hello there"),
                             {ActionKind::Ask, "tastes?"});
    CHECK(gateway2.ledger().count(Role::Simulator) == 1);
}

TEST_CASE("opening utterance modes") {
    Gateway gateway(auto_mock());
    Persona persona{"u1", {"a"}, {"gardens"}, "c", "d", {}};
    ItemRef target = ecpo::testing::make_item(5);

    SimulatorConfig generated;
    generated.opener_mode = "generated";
    auto sim = make_simulator(gateway, generated);
    auto [text, source] = sim.opening_utterance(persona, target);
    CHECK(source == "generated");
    CHECK_FALSE(text.empty());
    CHECK_FALSE(contains_normalized(text, target.title));
    CHECK(gateway.ledger().count(Role::Simulator) == 1);

    SimulatorConfig templated;
    templated.opener_mode = "template";
    auto sim2 = make_simulator(gateway, templated);
    auto [text2, source2] = sim2.opening_utterance(persona, target);
    CHECK(source2 == "template");
    CHECK(gateway.ledger().count(Role::Simulator) == 1);  // no extra call
}

TEST_CASE("build_personas: scripted keyword mapping and minimum review count") {
    std::vector<Review> reviews;
    auto add = [&](const std::string& user, int n, const std::string& phrase) {
        for (int i = 0; i < n; ++i) {
            Review r;
            r.user_id = user;
            r.item_id = user + "-i" + std::to_string(i);
            r.title = "Item " + std::to_string(i);
            r.review_text = phrase + " " + std::to_string(i);
            r.rating = 5.0;
            r.domain = "game";
            reviews.push_back(r);
        }
    };
    add("u-board", 4, "board games with quick sessions are my favourite games");
    add("u-few", 2, "barely reviews anything");
    auto catalog = ingest_reviews(reviews);

    // Scripted rule: any persona request mentioning board games maps to a
    // gaming persona.
    ScriptedBehavior behavior;
    behavior.rules.push_back(
        {"*board games*",
         json{{"activities", {"hosting board game nights"}},
              {"interests", {"board games", "quick sessions"}},
              {"language_style", "enthusiastic"},
              {"orientations", "quick picks"}}
             .dump()});
    behavior.auto_synthesize = false;
    Gateway gateway(std::make_shared<MockProvider>(behavior));

    PersonaBuildConfig config;
    config.min_reviews = 3;
    config.domain = "game";
    auto result = build_personas(catalog, gateway, PromptRegistry::instance(), 10, config);
    REQUIRE(result.personas.size() == 1);  // u-few skipped
    CHECK(result.skipped_users == 1);
    CHECK(result.personas[0].id == "u-board");
    CHECK(result.personas[0].interests[0].find("board games") != std::string::npos);
    CHECK_FALSE(result.personas[0].source_reviews.empty());
    CHECK_FALSE(result.log.empty());
}

TEST_CASE("100 personas build from a 100-user corpus, one backend call each") {
    std::vector<Review> reviews;
    for (int u = 0; u < 100; ++u)
        for (int i = 0; i < 3; ++i) {
            Review r;
            r.user_id = "u" + std::to_string(u);
            r.item_id = r.user_id + "-i" + std::to_string(i);
            r.title = "Item " + std::to_string(i);
            r.review_text = "distinctive review number " + std::to_string(u * 3 + i) +
                            " praising careful pacing";
            r.rating = 5.0;
            reviews.push_back(r);
        }
    auto catalog = ingest_reviews(reviews);
    Gateway gateway(auto_mock());
    auto result = build_personas(catalog, gateway, PromptRegistry::instance(), 100, {});
    CHECK(result.personas.size() == 100);
    CHECK(gateway.ledger().count(Role::Simulator) == 100);
    for (const auto& p : result.personas) CHECK(p.complete());

    // Diversity over the full sample of 100.
    auto report = persona_diversity(result.personas, 100);
    CHECK(report.max_scores.size() == 100);
    CHECK(report.mean >= 0.0);
    CHECK(report.mean <= 1.0);
}

TEST_CASE("auto-mock persona pulls interests from review tokens") {
    std::vector<Review> reviews;
    for (int i = 0; i < 3; ++i) {
        Review r;
        r.user_id = "u1";
        r.item_id = "i" + std::to_string(i);
        r.title = "Item";
        r.review_text = "wonderful labyrinth chapters with moody cartography throughout";
        r.rating = 5.0;
        reviews.push_back(r);
    }
    auto catalog = ingest_reviews(reviews);
    Gateway gateway(auto_mock());
    PersonaBuildConfig config;
    config.domain = "book";
    auto result = build_personas(catalog, gateway, PromptRegistry::instance(), 1, config);
    REQUIRE(result.personas.size() == 1);
    const auto& p = result.personas[0];
    CHECK(p.complete());
    bool mentions_review_token = false;
    for (const auto& interest : p.interests)
        if (interest.find("labyrinth") != std::string::npos ||
            interest.find("cartography") != std::string::npos ||
            interest.find("wonderful") != std::string::npos ||
            interest.find("chapters") != std::string::npos)
            mentions_review_token = true;
    CHECK(mentions_review_token);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "ecpo/builder.hpp"
#include "ecpo/mock_provider.hpp"
#include "helpers.hpp"

using namespace ecpo;
using nlohmann::json;
using ecpo::testing::EpisodeSpec;
using ecpo::testing::make_episode;

namespace {

Gateway auto_gateway() { return Gateway(std::make_shared<MockProvider>(ScriptedBehavior{})); }

std::vector<ECTuple> scripted_tuples(const std::vector<int>& scores) {
    std::vector<ECTuple> tuples;
    auto episode = make_episode({.turns = 1});
    for (std::size_t i = 0; i < scores.size(); ++i) {
        ECTuple t;
        t.source_episode = "t-" + std::to_string(i / 6);
        t.source_turn = static_cast<int>(i % 6) + 1;
        t.state = response_context(episode, 1);
        t.strategy = "probe";
        t.reasoning = "reasoning " + std::to_string(i);
        t.action = {ActionKind::Ask, "question " + std::to_string(i) + "?"};
        int s = scores[i];
        int flex = std::min(2, 5 - s);
        int coh = std::min(2, 5 - s - flex);
        int guide = 5 - s - flex - coh;
        t.ec = make_ec_record("deductions noted: flexibility issue, no next step", flex, coh,
                              guide);
        tuples.push_back(std::move(t));
    }
    return tuples;
}

}  // namespace

TEST_CASE("target text renders and parses back") {
    Action a{ActionKind::Recommend, "Title One; Title Two - both fit."};
    std::string text = render_target_text("recommend", "user asked twice", a);
    ParsedTarget parsed = parse_target_text(text);
    CHECK(parsed.strategy == "recommend");
    CHECK(parsed.reasoning == "user asked twice");
    CHECK(parsed.action == a);
    CHECK_THROWS_AS(parse_target_text("{\"strategy\": \"s\"}"), ParseError);
}

TEST_CASE("build_sft keeps only Success episodes, one example per turn") {
    std::vector<Episode> episodes;
    episodes.push_back(make_episode({.task_id = "s1", .turns = 3, .succeed_at = 3}));
    episodes.push_back(make_episode({.task_id = "s2", .turns = 3, .succeed_at = 3}));
    episodes.push_back(make_episode({.task_id = "f1", .turns = 4, .succeed_at = 0}));

    auto result = build_sft(episodes);
    CHECK(result.examples.size() == 6);
    CHECK(result.episodes_total == 3);
    CHECK(result.episodes_used == 2);

    // Parse-back oracle on every emitted target.
    for (const auto& example : result.examples) {
        ParsedTarget parsed = parse_target_text(example.target_text);
        CHECK_FALSE(parsed.action.payload.empty());
    }
}

TEST_CASE("build_sft empty result is allowed") {
    auto result = build_sft({make_episode({.turns = 2, .succeed_at = 0})});
    CHECK(result.examples.empty());
    CHECK(result.episodes_used == 0);
}

TEST_CASE("sft example states include the turn's own retrieval context") {
    auto episode = make_episode({.turns = 2, .succeed_at = 2, .search_at = {2}});
    auto result = build_sft({episode});
    REQUIRE(result.examples.size() == 2);
    CHECK_FALSE(result.examples[0].state.last_retrieval.has_value());
    CHECK(result.examples[1].state.last_retrieval.has_value());
}

TEST_CASE("collect_ec reuses embedded records without any backend call") {
    std::vector<Episode> episodes;
    for (int i = 0; i < 5; ++i)
        episodes.push_back(make_episode(
            {.task_id = "e" + std::to_string(i), .turns = 4, .with_ec = true,
             .seed = 50u + static_cast<unsigned>(i)}));

    Gateway gateway = auto_gateway();
    SimulatorConfig config;
    config.domain = "book";
    Simulator simulator(&gateway, &PromptRegistry::instance(), config);

    auto result = collect_ec(episodes, &simulator);
    CHECK(result.tuples.size() == 20);
    CHECK(result.reused_records == 20);
    CHECK(result.confirmed_records == 0);
    CHECK(gateway.ledger().total() == 0);  // ledger untouched on the reuse path
}

TEST_CASE("collect_ec confirms exactly once per turn when records are missing") {
    auto episode = make_episode({.turns = 3, .with_ec = false});
    Gateway gateway = auto_gateway();
    SimulatorConfig config;
    config.domain = "book";
    Simulator simulator(&gateway, &PromptRegistry::instance(), config);

    auto result = collect_ec({episode}, &simulator);
    CHECK(result.tuples.size() == 3);
    CHECK(result.confirmed_records == 3);
    CHECK(gateway.ledger().count(Role::Simulator) == 3);
    CHECK(gateway.ledger().count(Role::Agent) == 0);

    // Without a simulator the turns are skipped with a log entry.
    auto skipped = collect_ec({episode}, nullptr);
    CHECK(skipped.tuples.empty());
    CHECK(skipped.skipped == 3);
    CHECK_FALSE(skipped.log.empty());
}

TEST_CASE("no-extra-sampling: a full preference build performs zero agent calls") {
    std::vector<Episode> episodes;
    for (int i = 0; i < 50; ++i)
        episodes.push_back(make_episode(
            {.task_id = "e" + std::to_string(i), .turns = 3, .with_ec = true,
             .seed = 100u + static_cast<unsigned>(i)}));

    Gateway gateway = auto_gateway();
    auto before = gateway.ledger().snapshot();
    auto collected = collect_ec(episodes, nullptr);
    BuildConfig config;
    auto rewritten =
        derive_rewrites(collected.tuples, gateway, PromptRegistry::instance(), config);
    auto after = gateway.ledger().snapshot();

    CHECK(after["agent"] == before["agent"]);  // zero agent sampling
    CHECK(after["simulator"] == before["simulator"]);
    CHECK(after["rewriter"] ==
          before["rewriter"] + static_cast<std::uint64_t>(rewritten.selected));
    CHECK(rewritten.pairs.size() + static_cast<std::size_t>(rewritten.dropped_identical +
                                                            rewritten.dropped_unparseable) ==
          static_cast<std::size_t>(rewritten.selected));
}

TEST_CASE("threshold selection is strict by default, inclusive behind the flag") {
    auto tuples = scripted_tuples({5, 4, 3, 2});
    Gateway gateway = auto_gateway();

    BuildConfig strict;
    strict.lambda_threshold = 4.0;
    auto result = derive_rewrites(tuples, gateway, PromptRegistry::instance(), strict);
    CHECK(result.selected == 2);  // scores 3 and 2 only
    std::set<int> scores;
    for (const auto& pair : result.pairs) scores.insert(pair.ec.score);
    CHECK(scores == std::set<int>{3, 2});

    BuildConfig inclusive = strict;
    inclusive.inclusive = true;
    auto inclusive_result =
        derive_rewrites(tuples, gateway, PromptRegistry::instance(), inclusive);
    CHECK(inclusive_result.selected == 3);  // 4, 3 and 2
}

TEST_CASE("pair sets nest monotonically across lambda") {
    std::vector<int> scores;
    for (int s = 0; s <= 5; ++s)
        for (int k = 0; k < 4; ++k) scores.push_back(s);
    auto tuples = scripted_tuples(scores);
    Gateway gateway = auto_gateway();

    auto pair_keys = [&](double lambda) {
        BuildConfig config;
        config.lambda_threshold = lambda;
        auto result = derive_rewrites(tuples, gateway, PromptRegistry::instance(), config);
        std::set<std::string> keys;
        for (const auto& pair : result.pairs)
            keys.insert(pair.source_episode + "#" + std::to_string(pair.source_turn) + "#" +
                        pair.dispreferred);
        return keys;
    };

    auto l1 = pair_keys(1.0), l2 = pair_keys(2.0), l3 = pair_keys(3.0), l4 = pair_keys(4.0),
         l5 = pair_keys(5.0);
    auto subset = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    CHECK(subset(l1, l2));
    CHECK(subset(l2, l3));
    CHECK(subset(l3, l4));
    CHECK(subset(l4, l5));
    CHECK(l5.size() > l1.size());
}

TEST_CASE("echoing rewriter drops every pair as identical") {
    auto tuples = scripted_tuples({1, 1, 1});
    ScriptedBehavior echo;
    echo.rules.push_back({std::string("*") + kMarkerRewrite + "*question 0?*",
                          json{{"reason", "no change"}, {"refinement", "Ask[question 0?]"}}
                              .dump()});
    echo.rules.push_back({std::string("*") + kMarkerRewrite + "*question 1?*",
                          json{{"reason", "no change"}, {"refinement", "Ask[question 1?]"}}
                              .dump()});
    echo.rules.push_back({std::string("*") + kMarkerRewrite + "*question 2?*",
                          json{{"reason", "no change"}, {"refinement", "Ask[question 2?]"}}
                              .dump()});
    echo.auto_synthesize = false;
    Gateway gateway(std::make_shared<MockProvider>(echo));

    BuildConfig config;
    auto result = derive_rewrites(tuples, gateway, PromptRegistry::instance(), config);
    CHECK(result.selected == 3);
    CHECK(result.pairs.empty());
    CHECK(result.dropped_identical == 3);
}

TEST_CASE("unparseable refinements are dropped and counted") {
    auto tuples = scripted_tuples({1});
    ScriptedBehavior bad;
    bad.fallback = "not json at all";
    bad.auto_synthesize = false;
    Gateway gateway(std::make_shared<MockProvider>(bad), /*repair_retries=*/1);
    BuildConfig config;
    auto result = derive_rewrites(tuples, gateway, PromptRegistry::instance(), config);
    CHECK(result.pairs.empty());
    CHECK(result.dropped_unparseable == 1);
}

TEST_CASE("rewrites keep provenance and differ from the original") {
    auto episodes = std::vector<Episode>{make_episode({.task_id = "prov", .turns = 3})};
    auto collected = collect_ec(episodes, nullptr);
    Gateway gateway = auto_gateway();
    BuildConfig config;
    config.lambda_threshold = 5.0;
    config.inclusive = true;  // select everything
    auto result = derive_rewrites(collected.tuples, gateway, PromptRegistry::instance(),
                                  config);
    REQUIRE_FALSE(result.pairs.empty());
    for (const auto& pair : result.pairs) {
        CHECK(pair.preferred != pair.dispreferred);
        CHECK(pair.source_episode == "prov");
        // The stored state reconstructs to the generation context.
        DialogueState expected = response_context(episodes[0], pair.source_turn);
        CHECK(pair.state.render() == expected.render());
        // With reasoning included, both sides parse as full targets.
        ParsedTarget dis = parse_target_text(pair.dispreferred);
        ParsedTarget pre = parse_target_text(pair.preferred);
        CHECK(dis.strategy == pre.strategy);
        CHECK_FALSE(pair.rewrite_rationale.empty());
    }
}

TEST_CASE("oversized rewrites are flagged, not dropped") {
    auto tuples = scripted_tuples({1});
    ScriptedBehavior blowup;
    std::string huge =
        "Ask[an entirely different and much longer question about everything you have ever "
        "enjoyed, disliked, reread, abandoned, recommended to friends or returned?]";
    blowup.fallback = json{{"reason", "total rewrite"}, {"refinement", huge}}.dump();
    blowup.auto_synthesize = false;
    Gateway gateway(std::make_shared<MockProvider>(blowup));
    BuildConfig config;
    auto result = derive_rewrites(tuples, gateway, PromptRegistry::instance(), config);
    REQUIRE(result.pairs.size() == 1);
    CHECK(result.pairs[0].edit_ratio_exceeded);
    CHECK(result.flagged_edit_ratio == 1);
}

TEST_CASE("1000 tasks at a plausible success rate yield about 2000 examples") {
    // 60% success with 3-4 turn dialogues lands near two examples per task.
    std::vector<Episode> episodes;
    for (int i = 0; i < 1000; ++i) {
        EpisodeSpec spec;
        spec.task_id = "t" + std::to_string(i);
        spec.seed = 7000u + static_cast<unsigned>(i);
        if (i % 5 < 3)
            spec.succeed_at = 3 + i % 2;  // successes at 3-4 turns
        else
            spec.turns = 5;
        episodes.push_back(make_episode(spec));
    }
    auto result = build_sft(episodes);
    CHECK(result.episodes_used == 600);
    CHECK(result.examples.size() >= 1800);
    CHECK(result.examples.size() <= 2200);
}

TEST_CASE("500 recorded episodes yield at most 2500 tuples and zero agent calls") {
    std::vector<Episode> episodes;
    for (int i = 0; i < 500; ++i)
        episodes.push_back(make_episode({.task_id = "t" + std::to_string(i),
                                         .turns = 1 + i % 5,
                                         .with_ec = true,
                                         .seed = 9000u + static_cast<unsigned>(i)}));
    Gateway gateway = auto_gateway();
    auto collected = collect_ec(episodes, nullptr);
    CHECK(collected.tuples.size() <= 2500);
    CHECK(collected.tuples.size() == 1500);  // 1+2+3+4+5 per block of five
    CHECK(gateway.ledger().count(Role::Agent) == 0);
    CHECK(gateway.ledger().total() == 0);
}

TEST_CASE("exports carry a sidecar with suggested fine-tuning settings") {
    ecpo::testing::TempDir dir("meta");
    auto episodes = std::vector<Episode>{make_episode({.turns = 2, .succeed_at = 2})};
    auto sft = build_sft(episodes);
    export_training_files(sft.examples, {}, ExportFormat::Sft, dir.path / "sft.jsonl");
    auto meta = json::parse(read_file(dir.path / "sft.jsonl.meta.json"));
    CHECK(meta.at("suggested_settings").at("learning_rate") == doctest::Approx(5e-05));
    CHECK(meta.at("suggested_settings").at("batch_size") == 8);

    auto collected = collect_ec(episodes, nullptr);
    Gateway gateway = auto_gateway();
    BuildConfig config;
    config.lambda_threshold = 5.0;
    config.inclusive = true;
    auto pairs =
        derive_rewrites(collected.tuples, gateway, PromptRegistry::instance(), config).pairs;
    REQUIRE_FALSE(pairs.empty());
    export_training_files({}, pairs, ExportFormat::Dpo, dir.path / "dpo.jsonl");
    auto dpo_meta = json::parse(read_file(dir.path / "dpo.jsonl.meta.json"));
    auto rates = dpo_meta.at("suggested_settings").at("learning_rates");
    CHECK(rates.size() == 2);
    CHECK(rates[0] == doctest::Approx(1e-06));
    CHECK(rates[1] == doctest::Approx(5e-07));
    CHECK(dpo_meta.at("suggested_settings").at("batch_size") == 32);
}

TEST_CASE("export formats and round-trips") {
    ecpo::testing::TempDir dir("export");
    auto episodes = std::vector<Episode>{make_episode({.turns = 3, .succeed_at = 3})};
    auto sft = build_sft(episodes);

    auto collected = collect_ec(episodes, nullptr);
    Gateway gateway = auto_gateway();
    BuildConfig config;
    config.lambda_threshold = 5.0;
    config.inclusive = true;
    auto pairs = derive_rewrites(collected.tuples, gateway, PromptRegistry::instance(),
                                 config)
                     .pairs;
    REQUIRE(pairs.size() >= 1);

    SUBCASE("dpo: one record per pair, fields reproduce") {
        export_training_files({}, pairs, ExportFormat::Dpo, dir.path / "dpo.jsonl");
        auto records = import_dpo_file(dir.path / "dpo.jsonl");
        REQUIRE(records.size() == pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(records[i].prompt == pairs[i].state.render());
            CHECK(records[i].chosen == pairs[i].preferred);
            CHECK(records[i].rejected == pairs[i].dispreferred);
        }
    }

    SUBCASE("kto: two unary records per pair, desirable first") {
        export_training_files({}, pairs, ExportFormat::Kto, dir.path / "kto.jsonl");
        auto records = import_kto_file(dir.path / "kto.jsonl");
        REQUIRE(records.size() == 2 * pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(records[2 * i].desirable);
            CHECK(records[2 * i].completion == pairs[i].preferred);
            CHECK_FALSE(records[2 * i + 1].desirable);
            CHECK(records[2 * i + 1].completion == pairs[i].dispreferred);
        }
    }

    SUBCASE("sft export round-trips prompt/completion") {
        export_training_files(sft.examples, {}, ExportFormat::Sft, dir.path / "sft.jsonl");
        auto records = import_sft_file(dir.path / "sft.jsonl");
        REQUIRE(records.size() == sft.examples.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            CHECK(records[i].prompt == sft.examples[i].state.render());
            CHECK(records[i].completion == sft.examples[i].target_text);
        }
    }

    SUBCASE("unknown format errors") {
        CHECK_THROWS_AS(export_format_from_string("simpo"), ConfigError);
    }
}

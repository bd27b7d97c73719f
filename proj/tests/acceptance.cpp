// Acceptance suite: one line per criterion, offline, deterministic mock
// backend throughout. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "ecpo/agent.hpp"
#include "ecpo/builder.hpp"
#include "ecpo/metrics.hpp"
#include "ecpo/pipeline.hpp"
#include "ecpo/serialization.hpp"
#include "ecpo/trainer.hpp"
#include "helpers.hpp"

using namespace ecpo;
using nlohmann::json;
using ecpo::testing::EpisodeSpec;
using ecpo::testing::make_episode;

namespace {

struct Harness {
    int failures = 0;

    void run(int number, const std::string& label, const std::function<std::string()>& fn) {
        auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = fn();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
        std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << number << ": " << label
                  << "  [" << ms << " ms]" << (detail.empty() ? "" : "  - " + detail)
                  << std::endl;
        if (!ok) ++failures;
    }
};

void expect(bool condition, const std::string& message) {
    if (!condition) throw EcpoError(message);
}

Gateway auto_gateway() { return Gateway(std::make_shared<MockProvider>(ScriptedBehavior{})); }

// --- shared fixtures -------------------------------------------------------

struct AgentWorld {
    ecpo::testing::TempDir dir{"acceptance-world"};
    Catalog catalog;
    EmbeddingIndex index;
    HashEmbedder embedder{64, 0x5eed};
    std::unique_ptr<Gateway> gateway;
    std::unique_ptr<Simulator> simulator;
    std::map<std::string, Persona> personas;
    std::vector<Task> tasks;
    EpisodeDeps deps;
    AgentConfig config;

    explicit AgentWorld(std::shared_ptr<Provider> provider) {
        make_demo_corpus(dir.path / "corpus.jsonl", 6, 10, "book", 42);
        catalog = ingest_corpus(dir.path / "corpus.jsonl");
        index = embed_items(catalog, embedder);
        gateway = std::make_unique<Gateway>(std::move(provider));
        for (const auto& [user, _] : catalog.user_items) {
            Persona p;
            p.id = user;
            p.activities = {"reading late"};
            p.interests = {"layered stories"};
            p.language_style = "direct";
            p.orientations = "precise matches";
            personas[user] = p;
        }
        for (const auto& [user, positive] : catalog.user_positive)
            for (const auto& item_id : positive)
                tasks.push_back(
                    {"t-" + user + "-" + item_id, user, catalog.item(item_id), "book"});
        SimulatorConfig sim_config;
        sim_config.domain = "book";
        sim_config.opener_mode = "template";
        simulator = std::make_unique<Simulator>(gateway.get(), &PromptRegistry::instance(),
                                                sim_config);
        config.domain = "book";
        deps = {gateway.get(),
                {&catalog, &index, &embedder, &gateway->ledger(), config.top_k},
                &PromptRegistry::instance(),
                simulator.get(),
                &catalog};
    }
};

// Five turns, exactly two searches, simulator never accepts.
class FiveTurnTwoSearchProvider : public Provider {
  public:
    std::string complete(const CompletionRequest& request) override {
        const std::string& sys = request.system_prompt;
        std::string all = sys;
        for (const auto& m : request.messages) all += "\n" + m.text;
        if (sys.find(kMarkerAgent) != std::string::npos) {
            if (all.find(kMarkerAgentObservation) != std::string::npos)
                return step("recommend", "Recommend[A Decoy Nobody Wants - close enough?]");
            int users = 0;
            for (std::size_t p = all.find("user: "); p != std::string::npos;
                 p = all.find("user: ", p + 1))
                ++users;
            switch (users) {
                case 1: return step("clarify", "Ask[What are you in the mood for?]");
                case 2: return step("search", "Search[alpha keywords]");
                case 3: return step("hold", "Response[Let me think about that.]");
                case 4: return step("search", "Search[beta keywords]");
                default: return step("clarify", "Ask[Anything else that matters?]");
            }
        }
        json ec = {{"reason", "not it"},
                   {"flexibility_deduction", 1},
                   {"coherence_deduction", 1},
                   {"guidance_deduction", 0},
                   {"rating", 3}};
        return json{{"policy", "Expressing Dissatisfaction"},
                    {"utterance", "Still not right."},
                    {"ec", ec}}
            .dump();
    }
    std::string name() const override { return "five-turn-two-search"; }

  private:
    static std::string step(const std::string& strategy, const std::string& action) {
        return json{{"strategy", strategy}, {"reasoning", "scripted"}, {"action", action}}
            .dump();
    }
};

std::vector<ECTuple> tuples_with_scores(const std::vector<int>& scores) {
    std::vector<ECTuple> tuples;
    auto episode = make_episode({.turns = 1});
    for (std::size_t i = 0; i < scores.size(); ++i) {
        ECTuple t;
        t.source_episode = "e" + std::to_string(i);
        t.source_turn = 1;
        t.state = response_context(episode, 1);
        t.strategy = "s";
        t.reasoning = "r" + std::to_string(i);
        t.action = {ActionKind::Ask, "q" + std::to_string(i) + "?"};
        int s = scores[i];
        int flex = std::min(2, 5 - s);
        int coh = std::min(2, 5 - s - flex);
        t.ec = make_ec_record("flexibility issue; no next step", flex, coh,
                              5 - s - flex - coh);
        tuples.push_back(std::move(t));
    }
    return tuples;
}

std::shared_ptr<Vocab> pair_vocab() {
    auto vocab = std::make_shared<Vocab>();
    for (const char* w : {"ask", "about", "genre", "tone", "maps", "atlas", "kindly",
                          "clarify", "respond", "search", "again", "better", "worse",
                          "ctx", "a", "b", "c", "d", "e"})
        vocab->add(w);
    return vocab;
}

std::vector<TokenizedPair> synthetic_pairs(const Vocab& vocab, int n) {
    static const char* chosen_texts[] = {"ask about genre", "clarify tone kindly",
                                         "search maps again", "respond kindly",
                                         "ask about atlas"};
    static const char* rejected_texts[] = {"ask again again", "respond worse",
                                           "search search search", "worse worse",
                                           "about about about"};
    static const char* contexts[] = {"ctx a", "ctx b", "ctx c", "ctx d", "ctx e"};
    std::vector<TokenizedPair> pairs;
    for (int i = 0; i < n; ++i) {
        TokenizedPair p;
        p.context = vocab.encode(contexts[i % 5]);
        p.chosen = vocab.encode(chosen_texts[i % 5]);
        p.chosen.push_back(Vocab::kEos);
        p.rejected = vocab.encode(rejected_texts[(i + i / 5) % 5]);
        p.rejected.push_back(Vocab::kEos);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace

int main() {
    Harness harness;

    harness.run(1, "no extra sampling: preference build from 50 recorded episodes", [] {
        auto start = std::chrono::steady_clock::now();
        std::vector<Episode> episodes;
        for (int i = 0; i < 50; ++i)
            episodes.push_back(make_episode({.task_id = "e" + std::to_string(i),
                                             .turns = 1 + i % 5,
                                             .max_turns = 5,
                                             .with_ec = true,
                                             .seed = 3000u + static_cast<unsigned>(i)}));
        Gateway gateway = auto_gateway();
        auto before = gateway.ledger().snapshot();
        auto collected = collect_ec(episodes, nullptr);
        BuildConfig config;  // lambda 4.0, strict
        auto built = derive_rewrites(collected.tuples, gateway, PromptRegistry::instance(),
                                     config);
        auto after = gateway.ledger().snapshot();

        int sub_threshold = 0;
        for (const auto& t : collected.tuples)
            if (config.selects(t.ec.score)) ++sub_threshold;

        expect(after["agent"] - before["agent"] == 0, "agent calls during the build");
        expect(after["simulator"] - before["simulator"] == 0,
               "simulator calls despite recorded EC");
        expect(after["rewriter"] - before["rewriter"] <=
                   static_cast<std::uint64_t>(sub_threshold),
               "more than one rewriter call per sub-threshold turn");
        auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        expect(elapsed < 10, "build exceeded 10 s");
        return "agent +0, simulator +0, rewriter +" +
               std::to_string(after["rewriter"] - before["rewriter"]) + " over " +
               std::to_string(sub_threshold) + " sub-threshold turns, " +
               std::to_string(built.pairs.size()) + " pairs";
    });

    harness.run(2, "call accounting: 5-turn episode with 2 searches = N + M = 7", [] {
        AgentWorld world(std::make_shared<FiveTurnTwoSearchProvider>());
        const Task& task = world.tasks.front();
        Episode episode =
            run_episode(task, world.personas.at(task.persona_id), world.deps, world.config);
        expect(episode.turns.size() == 5, "expected 5 turns");
        int searches = 0;
        for (const auto& t : episode.turns)
            if (t.retrieval) ++searches;
        expect(searches == 2, "expected exactly 2 searches");
        auto agent_calls = world.gateway->ledger().count(Role::Agent);
        expect(agent_calls == 7, "agent calls = " + std::to_string(agent_calls) + ", not 7");
        return std::string("agent calls = 7 (N=5, M=2), exact");
    });

    harness.run(3, "EC rubric: all 18 combinations, recomputation precedence", [] {
        int combos = 0;
        for (int flex = 0; flex <= 2; ++flex)
            for (int coh = 0; coh <= 2; ++coh)
                for (int guide = 0; guide <= 1; ++guide) {
                    ECRecord r = make_ec_record("x", flex, coh, guide);
                    expect(r.score == 5 - flex - coh - guide, "score arithmetic");
                    expect(r.score >= 0 && r.score <= 5, "score range");
                    ++combos;
                }
        expect(combos == 18, "combination count");
        bool out_of_range_rejected = false;
        try {
            make_ec_record("x", 3, 0, 0);
        } catch (const SchemaError&) {
            out_of_range_rejected = true;
        }
        expect(out_of_range_rejected, "out-of-range deduction accepted");
        ECRecord mismatch = make_ec_record("x", 1, 1, 0, /*claimed=*/4);
        expect(mismatch.score == 3 && mismatch.discrepancy,
               "recomputed value must win with a flag");
        return std::string("18/18 combinations, scores confined to {0..5}, recompute wins");
    });

    harness.run(4, "threshold semantics: strict < at 4.0 and nesting across lambda", [] {
        std::vector<int> scores;
        for (int s = 0; s <= 5; ++s)
            for (int k = 0; k < 10; ++k) scores.push_back(s);
        auto tuples = tuples_with_scores(scores);
        Gateway gateway = auto_gateway();

        auto keys_at = [&](double lambda) {
            BuildConfig config;
            config.lambda_threshold = lambda;
            auto result =
                derive_rewrites(tuples, gateway, PromptRegistry::instance(), config);
            std::set<std::string> keys;
            for (const auto& p : result.pairs)
                keys.insert(p.source_episode + "#" + std::to_string(p.source_turn));
            return keys;
        };

        auto l4 = keys_at(4.0);
        expect(l4.size() == 40, "lambda=4.0 must select exactly the 40 tuples with score < 4");
        std::set<std::string> previous;
        for (double lambda : {1.0, 2.0, 3.0, 4.0, 5.0}) {
            auto current = keys_at(lambda);
            expect(std::includes(current.begin(), current.end(), previous.begin(),
                                 previous.end()),
                   "pair sets must nest");
            previous = std::move(current);
        }
        return std::string("40/60 selected at lambda=4.0, sets nest over {1,2,3,4,5}");
    });

    harness.run(5, "DPO numerics: ln 2 at zero margin, finite differences, beta scaling", [] {
        auto vocab = std::make_shared<Vocab>();
        vocab->add("red");
        vocab->add("blue");
        vocab->add("green");
        TokenizedPolicy policy(vocab);
        policy.init_random(19);
        expect(policy.parameter_count() == 50, "toy policy must stay at <= 50 parameters");
        TokenizedPolicy reference = policy;

        auto mk = [&](const std::string& ctx, const std::string& c, const std::string& r) {
            TokenizedPair p;
            p.context = vocab->encode(ctx);
            p.chosen = vocab->encode(c);
            p.chosen.push_back(Vocab::kEos);
            p.rejected = vocab->encode(r);
            p.rejected.push_back(Vocab::kEos);
            return p;
        };
        std::vector<TokenizedPair> batch = {mk("red", "blue green", "green green"),
                                            mk("blue", "red", "blue blue"),
                                            mk("green red", "green blue", "red red")};

        for (double beta : {0.1, 1.0, 5.0})
            expect(std::abs(dpo_loss(policy, reference, batch, beta) - std::log(2.0)) < 1e-9,
                   "zero-margin loss must equal ln 2");

        TokenizedPolicy moved(vocab);
        moved.init_random(23);
        for (double beta : {0.3, 1.0, 2.5}) {
            double loss = dpo_loss(moved, reference, batch, beta);
            double expected = 0.0;
            for (const auto& pair : batch) {
                double m = (moved.log_prob(pair.context, pair.chosen) -
                            reference.log_prob(pair.context, pair.chosen)) -
                           (moved.log_prob(pair.context, pair.rejected) -
                            reference.log_prob(pair.context, pair.rejected));
                double x = -beta * m;  // loss(beta, m) == loss(1, beta*m)
                expected += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
            }
            expected /= static_cast<double>(batch.size());
            expect(std::abs(loss - expected) < 1e-9, "beta scaling identity");
        }

        auto analytic = dpo_grad(moved, reference, batch, 0.7);
        auto& params = moved.parameters();
        const double eps = 1e-5;
        for (std::size_t i = 0; i < params.size(); ++i) {
            double saved = params[i];
            params[i] = saved + eps;
            double up = dpo_loss(moved, reference, batch, 0.7);
            params[i] = saved - eps;
            double down = dpo_loss(moved, reference, batch, 0.7);
            params[i] = saved;
            double numeric = (up - down) / (2 * eps);
            double tol = 1e-4 * std::max({1.0, std::abs(numeric), std::abs(analytic[i])});
            expect(std::abs(numeric - analytic[i]) <= tol,
                   "finite-difference mismatch at parameter " + std::to_string(i));
        }
        return std::string(
            "ln 2 within 1e-9, 50/50 gradients within 1e-4 relative, beta identity 1e-9");
    });

    harness.run(6, "toy alignment: margin <= 0 to > 0.5 nats within 200 steps", [] {
        auto vocab = pair_vocab();
        auto pairs = synthetic_pairs(*vocab, 20);

        auto run_once = [&] {
            TokenizedPolicy policy(vocab);
            policy.init_random(101);
            TokenizedPolicy reference = policy;
            double before = mean_margin(policy, reference, pairs);
            TrainConfig config;
            config.learning_rate = 0.2;
            config.epochs = 200;  // full batch: one step per epoch
            config.beta = 1.0;
            config.seed = 11;
            train_dpo(policy, pairs, config);
            double after = mean_margin(policy, reference, pairs);
            return std::make_pair(before, after);
        };
        auto [before_a, after_a] = run_once();
        auto [before_b, after_b] = run_once();
        expect(before_a <= 0.0 + 1e-12, "initial margin must be <= 0");
        expect(after_a > 0.5, "margin after 200 steps must exceed 0.5 nats");
        expect(before_a == before_b && after_a == after_b, "runs must be seed-deterministic");
        std::ostringstream ss;
        ss << "margin " << before_a << " -> " << after_a << " nats over 20 pairs";
        return ss.str();
    });

    harness.run(7, "retrieval exactness: 20 queries over a 200-item index", [] {
        HashEmbedder embedder(48, 0xabc);
        std::vector<Review> reviews;
        for (int i = 0; i < 200; ++i) {
            Review r;
            r.user_id = "u1";
            r.item_id = "i" + std::to_string(i);
            r.title = "Title word" + std::to_string(i % 31) + " word" + std::to_string(i % 17);
            r.review_text = "x";
            r.rating = 5.0;
            reviews.push_back(r);
        }
        auto catalog = ingest_reviews(reviews);
        auto index = embed_items(catalog, embedder);

        std::mt19937 rng(424242);
        for (int q = 0; q < 20; ++q) {
            std::string query = "word" + std::to_string(rng() % 31) + " word" +
                                std::to_string(rng() % 17) + " title";
            auto results = retrieve(index, catalog, query, 5, embedder);

            auto qv = embedder.embed({query})[0];
            double norm = 0.0;
            for (double x : qv) norm += x * x;
            norm = std::sqrt(norm);
            for (double& x : qv) x /= norm;
            std::vector<std::pair<double, std::string>> brute;
            for (const auto& [id, vec] : index.vectors) {
                double dot = 0.0;
                for (std::size_t d = 0; d < vec.size(); ++d) dot += vec[d] * qv[d];
                brute.emplace_back(dot, id);
            }
            std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            expect(results.size() == 5, "top-5 expected");
            for (std::size_t i = 0; i < 5; ++i)
                expect(results[i].item.item_id == brute[i].second,
                       "rank mismatch vs brute force at query " + std::to_string(q));
        }
        return std::string("20/20 queries rank-exact against the brute-force scan");
    });

    harness.run(8, "metrics: SR 0.56, R 0.58, self-WR 0.50, biased verdict 0.5", [] {
        std::vector<Episode> corpus;
        for (int i = 0; i < 100; ++i) {
            EpisodeSpec spec;
            spec.task_id = "t-" + std::to_string(i);
            spec.seed = 500 + static_cast<unsigned>(i);
            spec.turns = 3;
            spec.search_at = {2};
            if (i < 56) {
                spec.succeed_at = 3;
                spec.plant_target_in_search = true;
            } else if (i < 58) {
                spec.plant_target_in_search = true;
            }
            corpus.push_back(make_episode(spec));
        }
        expect(std::abs(success_rate(corpus) - 0.56) < 1e-12, "SR must be 0.56");
        expect(std::abs(recall_rate(corpus) - 0.58) < 1e-12, "R must be 0.58");

        std::vector<Episode> small(corpus.begin(), corpus.begin() + 10);
        Gateway gateway = auto_gateway();
        auto self = win_rate(small, small, gateway, PromptRegistry::instance());
        expect(self.win_rate == 0.5, "self-comparison WR must be exactly 0.50");
        expect(self.tasks_scored == 10, "all tasks must score");

        ScriptedBehavior biased;  // always prefers slot A
        biased.fallback = json{{"Flexibility", {{"Reason", "r"}, {"Score", 1}}},
                               {"Coherence", {{"Reason", "r"}, {"Score", 1}}},
                               {"User Guidance", {{"Reason", "r"}, {"Score", 1}}},
                               {"Final Score", 1}}
                              .dump();
        biased.auto_synthesize = false;
        Gateway biased_gateway(std::make_shared<MockProvider>(biased));
        Episode expert = corpus[1];
        expert.task_id = corpus[0].task_id;  // pair with the candidate
        auto one =
            win_rate({corpus[0]}, {expert}, biased_gateway, PromptRegistry::instance());
        expect(one.tasks_scored == 1, "biased pair must be judged");
        expect(one.win_rate == 0.5, "pure position bias must average to exactly 0.5");
        return std::string("SR=0.56 R=0.58 exact; self-WR=0.50; biased pair contributes 0.5");
    });

    harness.run(9, "ROUGE-L: identity, disjoint, 2/3 reference, symmetry", [] {
        expect(rouge_l("same text here", "same text here") == 1.0, "identity must be 1.0");
        expect(rouge_l("alpha beta", "gamma delta") == 0.0, "disjoint must be 0.0");
        expect(std::abs(rouge_l("the cat sat", "the dog sat") - 2.0 / 3.0) < 1e-9,
               "reference value 2/3");
        std::mt19937 rng(7);
        static const char* words[] = {"amber", "vivid", "quiet", "novel", "maps",
                                      "games", "fast",  "slow",  "deep",  "light"};
        for (int i = 0; i < 100; ++i) {
            std::string a, b;
            int na = 1 + static_cast<int>(rng() % 8), nb = 1 + static_cast<int>(rng() % 8);
            for (int k = 0; k < na; ++k) a += std::string(k ? " " : "") + words[rng() % 10];
            for (int k = 0; k < nb; ++k) b += std::string(k ? " " : "") + words[rng() % 10];
            expect(std::abs(rouge_l(a, b) - rouge_l(b, a)) < 1e-12, "symmetry violated");
        }
        return std::string("reference values exact, symmetric over 100 random pairs");
    });

    harness.run(10, "determinism: 10-task batch serializes identically at parallelism 1 and 4",
                [] {
                    std::vector<Task> tasks;
                    {
                        AgentWorld world(std::make_shared<MockProvider>(ScriptedBehavior{}));
                        tasks.assign(world.tasks.begin(), world.tasks.begin() + 10);
                    }
                    auto run_at = [&](int parallelism) {
                        AgentWorld world(std::make_shared<MockProvider>(ScriptedBehavior{}));
                        auto result = run_batch(tasks, world.personas, world.deps,
                                                world.config, parallelism);
                        return serialize_corpus(result.episodes);
                    };
                    std::string seq = run_at(1);
                    std::string par = run_at(4);
                    expect(seq == par, "corpora differ between parallelism 1 and 4");
                    return "byte-identical (" + std::to_string(seq.size()) + " bytes)";
                });

    harness.run(11, "end-to-end mock pipeline: 8 stages + verify under 60 s", [] {
        auto start = std::chrono::steady_clock::now();
        ecpo::testing::TempDir dir("acceptance-pipeline");
        make_demo_corpus(dir.path / "corpus.jsonl", 8, 10, "book", 42);
        PipelineConfig config;
        config.corpus = dir.path / "corpus.jsonl";
        config.out_dir = dir.path / "run";
        config.domain = "book";
        config.n_personas = 8;
        config.n_tasks = 20;
        config.seed = 1234;
        auto result = run_pipeline(config);
        expect(result.ok, "stage " + result.failed_stage + " failed: " + result.error);
        expect(result.completed.size() == 8, "expected 8 completed stages");
        auto report = verify_run(config.out_dir);
        for (const auto& check : report.checks)
            expect(check.ok, "verify check failed: " + check.name + " (" + check.detail + ")");
        auto seconds = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        expect(seconds < 60, "pipeline exceeded 60 s");
        return "8 stages, " + std::to_string(report.checks.size()) + " verify checks, " +
               std::to_string(seconds) + " s";
    });

    harness.run(12, "paper-scale numbers out of desk reach; http backend fails fast offline",
                [] {
                    // Table-scale absolute values (SR 0.41-0.56, WR 0.55-0.63) need
                    // GPT-4o-mini / Llama-3.1-8B LoRA runs on the original corpora;
                    // nothing here asserts them. The optional live smoke is
                    // `ecpo pipeline --backend http --n-tasks 5`, exercised only
                    // when ECPO_LIVE_SMOKE=1 and credentials exist.
                    if (std::getenv("ECPO_LIVE_SMOKE") && std::getenv("ECPO_API_KEY")) {
                        ecpo::testing::TempDir dir("live-smoke");
                        make_demo_corpus(dir.path / "corpus.jsonl", 5, 8, "book", 42);
                        PipelineConfig config;
                        config.backend = "http";
                        config.corpus = dir.path / "corpus.jsonl";
                        config.out_dir = dir.path / "run";
                        config.n_personas = 5;
                        config.n_tasks = 5;
                        auto result = run_pipeline(config);
                        expect(result.ok, "live smoke failed at " + result.failed_stage +
                                              ": " + result.error);
                        return std::string("live smoke completed with a well-formed report");
                    }
                    unsetenv("ECPO_API_KEY");
                    PipelineConfig config;
                    config.backend = "http";
                    config.corpus = "unused.jsonl";
                    config.out_dir = std::filesystem::temp_directory_path() / "ecpo-ff";
                    auto result = run_pipeline(config);
                    expect(!result.ok && result.failed_stage == "gateway-init",
                           "http without credentials must fail at gateway init");
                    expect(result.code == ExitCode::Gateway, "exit code family must be 9");
                    return std::string(
                        "no paper-value assertions; missing-key run failed at gateway-init "
                        "before any stage");
                });

    std::cout << (harness.failures == 0
                      ? "ALL CRITERIA PASSED"
                      : std::to_string(harness.failures) + " CRITERIA FAILED")
              << std::endl;
    return harness.failures;
}

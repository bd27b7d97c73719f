#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ecpo/http_provider.hpp"
#include "ecpo/metrics.hpp"
#include "ecpo/pipeline.hpp"
#include "ecpo/serialization.hpp"
#include "ecpo/trainer.hpp"

using namespace ecpo;
using nlohmann::json;

namespace {

int code(ExitCode c) { return static_cast<int>(c); }

PipelineConfig load_config(const std::string& config_file) {
    if (config_file.empty()) return PipelineConfig{};
    return PipelineConfig::from_json(json::parse(read_file(config_file)));
}

// Mirrors the effective config next to the outputs so runs are reproducible
// from the artifact directory alone.
void persist_effective_config(const PipelineConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    json j = config.to_json();
    j["config_hash"] = hash_hex(config.hash());
    write_file(config.out_dir / "effective_config.json", j.dump(2) + "\n");
}

int run_guarded(ExitCode family, const std::function<void()>& fn) {
    try {
        fn();
        return code(ExitCode::Ok);
    } catch (const GatewayError& e) {
        std::cerr << "gateway error: " << e.what() << "\n";
        return code(ExitCode::Gateway);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return code(ExitCode::Config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return code(family);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECPO toolkit: simulation, dataset builds, toy training, evaluation"};
    app.require_subcommand(1);
    app.fallthrough();  // parent options (--config) may follow the subcommand

    std::string config_file;
    app.add_option("--config", config_file, "JSON config file (flags override fields)")
        ->expected(1);

    // Shared override flags, attached per subcommand where they matter.
    auto add_backend_flags = [&](CLI::App* cmd, PipelineConfig& config) {
        cmd->add_option("--backend", config.backend, "mock | http");
        cmd->add_option("--scripted", config.scripted_file, "mock ScriptedBehavior file");
        cmd->add_option("--model", config.model, "model name for the http backend");
        cmd->add_option("--seed", config.seed, "root seed");
        cmd->add_option("--out", config.out_dir, "run directory");
    };

    static PipelineConfig config;  // filled after parse via config file + flags

    // gen-corpus
    auto* gen_corpus = app.add_subcommand("gen-corpus", "write a synthetic demo review corpus");
    std::string corpus_out = "corpus.jsonl";
    int corpus_users = 20, corpus_items = 12;
    std::string corpus_domain = "book";
    std::uint64_t corpus_seed = 42;
    gen_corpus->add_option("--out", corpus_out, "output corpus file");
    gen_corpus->add_option("--users", corpus_users, "number of users");
    gen_corpus->add_option("--items-per-user", corpus_items, "reviews per user");
    gen_corpus->add_option("--domain", corpus_domain, "item domain");
    gen_corpus->add_option("--seed", corpus_seed, "seed");

    // gen-tasks
    auto* gen_tasks = app.add_subcommand(
        "gen-tasks", "ingest a corpus, build personas, tasks and the embedding index");
    gen_tasks->add_option("--corpus", config.corpus, "review corpus (jsonl or csv)");
    gen_tasks->add_option("--n-personas", config.n_personas, "personas to build");
    gen_tasks->add_option("--per-user-cap", config.per_user_task_cap, "max tasks per user");
    gen_tasks->add_option("--domain", config.domain, "item domain");
    add_backend_flags(gen_tasks, config);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run episodes against the simulator");
    std::string slice = "sft";
    std::string tasks_file;
    std::string agent_kind = "actcrs";
    simulate->add_option("--slice", slice, "task slice: sft | pref | eval");
    simulate->add_option("--tasks", tasks_file, "tasks file (copied into the run directory)");
    simulate->add_option("--agent", agent_kind, "agent framework (actcrs)");
    simulate->add_option("--max-turns", config.max_turns, "turn budget per episode");
    simulate->add_option("--parallelism", config.parallelism, "episodes in flight");
    simulate->add_option("--opener", config.opener_mode, "generated | template");
    simulate->add_flag("!--global-catalog", config.per_user_catalog,
                       "retrieve over the whole catalog instead of the user's items");
    simulate->add_flag("--query-from-history", config.query_from_history,
                       "concatenate the dialogue history as the retrieval query");
    add_backend_flags(simulate, config);

    // build-sft
    auto* build_sft_cmd = app.add_subcommand("build-sft", "success-filtered SFT corpus");
    std::string in_file, out_file;
    build_sft_cmd->add_option("--in", in_file, "episodes file")->required();
    build_sft_cmd->add_option("--out-file", out_file, "SFT examples output (jsonl)");

    // build-pref
    auto* build_pref = app.add_subcommand(
        "build-pref", "forward EC collection plus backward rewriting into preference pairs");
    build_pref->add_option("--in", in_file, "episodes file (with or without EC records)")
        ->required();
    build_pref->add_option("--lambda", config.lambda, "rewrite threshold");
    build_pref->add_flag("--inclusive", config.inclusive,
                         "select score <= lambda instead of strict <");
    build_pref->add_option("--domain", config.domain, "item domain");
    add_backend_flags(build_pref, config);

    // train
    auto* train = app.add_subcommand("train", "toy-policy SFT or DPO training");
    std::string objective = "sft";
    std::string data_file, sft_aux_file, policy_out = "policy.bin";
    TrainConfig train_config;
    train->add_option("--objective", objective, "sft | dpo")->required();
    train->add_option("--data,--pairs", data_file, "training file (sft or dpo export)")
        ->required();
    train->add_option("--sft-data", sft_aux_file,
                      "SFT export used to fit the reference before DPO");
    train->add_option("--out-file", policy_out, "checkpoint output");
    train->add_option("--lr", train_config.learning_rate, "learning rate");
    train->add_option("--epochs", train_config.epochs, "epochs");
    train->add_option("--batch-size", train_config.batch_size, "0 = full batch");
    train->add_option("--beta", train_config.beta, "DPO beta");
    train->add_option("--train-seed", train_config.seed, "training seed");

    // export
    auto* export_cmd = app.add_subcommand("export", "re-export pairs or SFT examples");
    std::string export_format = "dpo";
    std::string pairs_file;
    export_cmd->add_option("--pairs", pairs_file, "pairs file (for dpo/kto)");
    export_cmd->add_option("--sft", in_file, "sft examples episodes file (for sft format)");
    export_cmd->add_option("--format", export_format, "sft | dpo | kto")->required();
    export_cmd->add_option("--out-file", out_file, "output file")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "SR/R metrics and judged win rate");
    std::string episodes_file, expert_file, report_out = "report.json";
    evaluate->add_option("--episodes", episodes_file, "candidate episodes")->required();
    evaluate->add_option("--expert", expert_file, "expert episodes (enables WR)");
    evaluate->add_option("--out-file", report_out, "report output");
    add_backend_flags(evaluate, config);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "lambda and sample-size sweeps");
    std::string sweep_episodes, sweep_out = "sweep.json";
    std::string lambdas_arg = "1,2,3,4";
    std::string sizes_arg;
    bool sweep_train = false;
    sweep->add_option("--episodes", sweep_episodes, "episodes with EC records")->required();
    sweep->add_option("--lambdas", lambdas_arg, "comma-separated thresholds");
    sweep->add_option("--sizes", sizes_arg, "comma-separated sample sizes (0 = All)");
    sweep->add_flag("--train", sweep_train, "train the toy policy per cell (margin metric)");
    sweep->add_option("--out-file", sweep_out, "report output (.json; .csv written too)");
    add_backend_flags(sweep, config);

    // diversity
    auto* diversity = app.add_subcommand("diversity", "persona max-ROUGE-L distribution");
    std::string personas_file;
    int diversity_sample = 100;
    diversity->add_option("--personas", personas_file, "personas file")->required();
    diversity->add_option("--sample", diversity_sample, "sample size");
    diversity->add_option("--out-file", report_out, "report output");

    // verify
    auto* verify = app.add_subcommand("verify", "re-check all cross-file invariants");
    std::filesystem::path verify_dir = "out";
    verify->add_option("--out", verify_dir, "run directory");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run all eight stages end to end");
    pipeline->add_option("--corpus", config.corpus, "review corpus");
    pipeline->add_option("--n-tasks", config.n_tasks, "cap on generated tasks (0 = all)");
    pipeline->add_option("--n-personas", config.n_personas, "personas to build");
    pipeline->add_option("--lambda", config.lambda, "rewrite threshold");
    pipeline->add_option("--max-turns", config.max_turns, "turn budget");
    pipeline->add_option("--parallelism", config.parallelism, "episodes in flight");
    pipeline->add_option("--domain", config.domain, "item domain");
    pipeline->add_option("--opener", config.opener_mode, "generated | template");
    pipeline->add_flag("!--global-catalog", config.per_user_catalog,
                       "retrieve over the whole catalog instead of the user's items");
    add_backend_flags(pipeline, config);

    // Load config file defaults before flags are applied.
    app.preparse_callback([&](std::size_t) {
        // --config is parsed manually from argv so file values act as defaults.
        for (int i = 1; i + 1 < argc; ++i)
            if (std::string(argv[i]) == "--config") config = load_config(argv[i + 1]);
    });

    CLI11_PARSE(app, argc, argv);

    if (*gen_corpus)
        return run_guarded(ExitCode::Gen, [&] {
            make_demo_corpus(corpus_out, corpus_users, corpus_items, corpus_domain,
                             corpus_seed);
            std::cout << "wrote " << corpus_out << "\n";
        });

    if (*gen_tasks)
        return run_guarded(ExitCode::Gen, [&] {
            config.validate();
            persist_effective_config(config);
            auto gateway = make_gateway(config);
            Manifest manifest(config.out_dir);
            manifest.set_config(config);
            stage_gen(config, *gateway, manifest);
            std::cout << "gen-tasks complete: " << (config.out_dir / "tasks.jsonl").string()
                      << "\n";
        });

    if (*simulate)
        return run_guarded(ExitCode::Simulate, [&] {
            if (agent_kind != "actcrs")
                throw ConfigError("unknown agent framework: " + agent_kind);
            if (slice != "sft" && slice != "pref" && slice != "eval")
                throw ConfigError("slice must be sft, pref or eval");
            config.validate();
            if (!tasks_file.empty())
                std::filesystem::copy_file(
                    tasks_file, config.out_dir / "tasks.jsonl",
                    std::filesystem::copy_options::overwrite_existing);
            persist_effective_config(config);
            auto gateway = make_gateway(config);
            Manifest manifest(config.out_dir);
            manifest.set_config(config);
            stage_simulate(config, *gateway, manifest, slice);
            std::cout << "simulate-" << slice << " complete\n";
        });

    if (*build_sft_cmd)
        return run_guarded(ExitCode::Build, [&] {
            auto episodes = read_episodes(in_file);
            auto built = build_sft(episodes);
            if (built.examples.empty())
                std::cerr << "warning: no Success episodes; SFT corpus is empty\n";
            std::string target = out_file.empty() ? "sft.jsonl" : out_file;
            if (!built.examples.empty())
                export_training_files(built.examples, {}, ExportFormat::Sft, target);
            std::cout << built.counters().dump(2) << "\n";
        });

    if (*build_pref)
        return run_guarded(ExitCode::Build, [&] {
            config.validate();
            persist_effective_config(config);
            auto gateway = make_gateway(config);
            auto episodes = read_episodes(in_file);
            SimulatorConfig sim_config;
            sim_config.domain = config.domain;
            Simulator simulator(gateway.get(), &PromptRegistry::instance(), sim_config);
            auto ledger_before = gateway->ledger().to_json();
            auto collected = collect_ec(episodes, &simulator);
            BuildConfig build;
            build.lambda_threshold = config.lambda;
            build.inclusive = config.inclusive;
            auto rewritten = derive_rewrites(collected.tuples, *gateway,
                                             PromptRegistry::instance(), build);
            std::filesystem::create_directories(config.out_dir);
            write_pairs(config.out_dir / "pairs.jsonl", rewritten.pairs);
            if (!rewritten.pairs.empty()) {
                export_training_files({}, rewritten.pairs, ExportFormat::Dpo,
                                      config.out_dir / "dpo.jsonl");
                export_training_files({}, rewritten.pairs, ExportFormat::Kto,
                                      config.out_dir / "kto.jsonl");
            }
            json manifest = {{"config_hash", hash_hex(config.hash())},
                             {"lambda", config.lambda},
                             {"inclusive", config.inclusive},
                             {"tuples", collected.tuples.size()},
                             {"reused_ec_records", collected.reused_records},
                             {"confirmed_ec_records", collected.confirmed_records},
                             {"counters", rewritten.counters()},
                             {"ledger_before", ledger_before},
                             {"ledger_after", gateway->ledger().to_json()}};
            write_file(config.out_dir / "build_manifest.json", manifest.dump(2) + "\n");
            std::cout << manifest.dump(2) << "\n";
        });

    if (*train)
        return run_guarded(ExitCode::Train, [&] {
            Objective obj = objective_from_string(objective);
            if (obj == Objective::Sft) {
                auto records = import_sft_file(data_file);
                auto vocab = std::make_shared<Vocab>([&] {
                    std::vector<std::string> corpus;
                    for (const auto& r : records) {
                        corpus.push_back(r.prompt);
                        corpus.push_back(r.completion);
                    }
                    return corpus;
                }());
                TokenizedPolicy policy(vocab);
                policy.init_random(train_config.seed);
                std::vector<TokenizedExample> dataset;
                for (const auto& r : records) dataset.push_back(tokenize_example(r, *vocab));
                auto result = train_sft(policy, dataset, train_config);
                policy.save(policy_out);
                std::cout << result.to_json().dump(2) << "\n";
            } else {
                auto pair_records = import_dpo_file(data_file);
                std::vector<SftRecord> sft_records;
                if (!sft_aux_file.empty()) sft_records = import_sft_file(sft_aux_file);
                std::vector<std::string> corpus;
                for (const auto& r : sft_records) {
                    corpus.push_back(r.prompt);
                    corpus.push_back(r.completion);
                }
                for (const auto& r : pair_records) {
                    corpus.push_back(r.prompt);
                    corpus.push_back(r.chosen);
                    corpus.push_back(r.rejected);
                }
                auto vocab = std::make_shared<Vocab>(corpus);
                TokenizedPolicy policy(vocab);
                policy.init_random(train_config.seed);
                if (!sft_records.empty()) {
                    std::vector<TokenizedExample> sft_dataset;
                    for (const auto& r : sft_records)
                        sft_dataset.push_back(tokenize_example(r, *vocab));
                    train_sft(policy, sft_dataset, train_config);
                }
                std::vector<TokenizedPair> pairs;
                for (const auto& r : pair_records)
                    pairs.push_back(tokenize_pair(r, *vocab));
                auto result = train_dpo(policy, pairs, train_config);
                policy.save(policy_out);
                std::cout << result.to_json().dump(2) << "\n";
            }
        });

    if (*export_cmd)
        return run_guarded(ExitCode::Build, [&] {
            ExportFormat format = export_format_from_string(export_format);
            if (format == ExportFormat::Sft) {
                auto episodes = read_episodes(in_file);
                auto built = build_sft(episodes);
                export_training_files(built.examples, {}, format, out_file);
            } else {
                auto pairs = read_pairs(pairs_file);
                export_training_files({}, pairs, format, out_file);
            }
            std::cout << "wrote " << out_file << "\n";
        });

    if (*evaluate)
        return run_guarded(ExitCode::Evaluate, [&] {
            auto episodes = read_episodes(episodes_file);
            json report;
            report["sr"] = success_rate(episodes);
            report["r"] = recall_rate(episodes);
            if (!expert_file.empty()) {
                auto expert = read_episodes(expert_file);
                auto gateway = make_gateway(config);
                report["win_rate"] =
                    win_rate(episodes, expert, *gateway, PromptRegistry::instance())
                        .to_json();
            }
            write_file(report_out, report.dump(2) + "\n");
            std::cout << report.dump(2) << "\n";
        });

    if (*sweep)
        return run_guarded(ExitCode::Evaluate, [&] {
            auto episodes = read_episodes(sweep_episodes);
            auto collected = collect_ec(episodes, nullptr);
            auto gateway = make_gateway(config);
            std::vector<double> lambdas;
            for (const auto& tok : tokenize(
                     [&] {
                         std::string s = lambdas_arg;
                         std::replace(s.begin(), s.end(), ',', ' ');
                         return s;
                     }()))
                lambdas.push_back(std::stod(tok));

            MetricClosure closure = nullptr;
            if (sweep_train) {
                closure = [&](const std::vector<PreferencePair>& pairs) -> double {
                    if (pairs.empty()) return 0.0;
                    std::vector<std::string> corpus;
                    std::vector<DpoRecord> records;
                    for (const auto& p : pairs) {
                        records.push_back({p.state.render(), p.preferred, p.dispreferred});
                        corpus.push_back(records.back().prompt);
                        corpus.push_back(p.preferred);
                        corpus.push_back(p.dispreferred);
                    }
                    auto vocab = std::make_shared<Vocab>(corpus);
                    TokenizedPolicy policy(vocab);
                    policy.init_random(derive_seed(config.seed, "sweep"));
                    std::vector<TokenizedPair> tokenized;
                    for (const auto& r : records)
                        tokenized.push_back(tokenize_pair(r, *vocab));
                    TokenizedPolicy reference = policy;
                    TrainConfig tc;
                    tc.epochs = 30;
                    tc.learning_rate = 0.2;
                    tc.seed = derive_seed(config.seed, "sweep-order");
                    train_dpo(policy, tokenized, tc);
                    return mean_margin(policy, reference, tokenized);
                };
            }

            BuildConfig base;
            base.inclusive = config.inclusive;
            auto report = lambda_sweep(collected.tuples, lambdas, *gateway,
                                       PromptRegistry::instance(), base, closure);
            json j = report.to_json();

            if (!sizes_arg.empty()) {
                std::vector<int> sizes;
                std::string s = sizes_arg;
                std::replace(s.begin(), s.end(), ',', ' ');
                for (const auto& tok : tokenize(s)) sizes.push_back(std::stoi(tok));
                BuildConfig full = base;
                full.lambda_threshold = config.lambda;
                auto pairs =
                    derive_rewrites(collected.tuples, *gateway, PromptRegistry::instance(),
                                    full)
                        .pairs;
                auto samples = sample_sweep(pairs, sizes, config.seed, closure);
                j["sample_sweep"] = samples.to_json();
                write_file(std::filesystem::path(sweep_out).replace_extension(".samples.csv"),
                           samples.to_csv());
            }
            write_file(sweep_out, j.dump(2) + "\n");
            write_file(std::filesystem::path(sweep_out).replace_extension(".csv"),
                       report.to_csv());
            std::cout << j.dump(2) << "\n";
        });

    if (*diversity)
        return run_guarded(ExitCode::Evaluate, [&] {
            auto personas = read_personas(personas_file);
            auto report = persona_diversity(personas, diversity_sample);
            write_file(report_out, report.to_json().dump(2) + "\n");
            std::cout << "mean max ROUGE-L: " << report.mean << " over "
                      << report.max_scores.size() << " personas\n";
        });

    if (*verify)
        return run_guarded(ExitCode::Verify, [&] {
            auto report = verify_run(verify_dir);
            for (const auto& check : report.checks)
                std::cout << (check.ok ? "PASS" : "FAIL") << "  " << check.name
                          << (check.detail.empty() ? "" : "  (" + check.detail + ")") << "\n";
            if (!report.ok()) throw EcpoError("verification failed");
        });

    if (*pipeline)
        return run_guarded(ExitCode::Config, [&] {
            config.validate();
            persist_effective_config(config);
            auto result = run_pipeline(config);
            for (const auto& stage : result.completed) std::cout << "stage " << stage
                                                                 << ": ok\n";
            if (!result.ok) {
                std::cerr << "stage " << result.failed_stage << ": " << result.error << "\n";
                std::exit(code(result.code));
            }
            std::cout << "pipeline complete; artifacts in " << config.out_dir.string()
                      << "\n";
        });

    return code(ExitCode::Config);
}

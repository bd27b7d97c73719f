#include "ecpo/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "ecpo/http_provider.hpp"
#include "ecpo/metrics.hpp"
#include "ecpo/serialization.hpp"
#include "ecpo/trainer.hpp"

namespace ecpo {

using nlohmann::json;

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("backend", c.backend);
    get("scripted_file", c.scripted_file);
    std::string path;
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    get("domain", c.domain);
    get("n_personas", c.n_personas);
    get("min_reviews", c.min_reviews);
    get("per_user_task_cap", c.per_user_task_cap);
    get("n_tasks", c.n_tasks);
    get("n_sft", c.n_sft);
    get("n_pref", c.n_pref);
    get("n_eval", c.n_eval);
    get("max_turns", c.max_turns);
    get("top_k", c.top_k);
    get("max_recommendations", c.max_recommendations);
    get("lambda", c.lambda);
    get("inclusive", c.inclusive);
    get("opener_mode", c.opener_mode);
    get("parallelism", c.parallelism);
    get("embed_dim", c.embed_dim);
    get("repair_retries", c.repair_retries);
    get("per_user_catalog", c.per_user_catalog);
    get("query_from_history", c.query_from_history);
    get("seed", c.seed);
    get("sft_learning_rate", c.sft_learning_rate);
    get("sft_epochs", c.sft_epochs);
    get("dpo_learning_rate", c.dpo_learning_rate);
    get("dpo_epochs", c.dpo_epochs);
    get("beta", c.beta);
    get("model", c.model);
    return c;
}

json PipelineConfig::to_json() const {
    return {{"backend", backend},
            {"scripted_file", scripted_file},
            {"corpus", corpus.string()},
            {"out_dir", out_dir.string()},
            {"domain", domain},
            {"n_personas", n_personas},
            {"min_reviews", min_reviews},
            {"per_user_task_cap", per_user_task_cap},
            {"n_tasks", n_tasks},
            {"n_sft", n_sft},
            {"n_pref", n_pref},
            {"n_eval", n_eval},
            {"max_turns", max_turns},
            {"top_k", top_k},
            {"max_recommendations", max_recommendations},
            {"lambda", lambda},
            {"inclusive", inclusive},
            {"opener_mode", opener_mode},
            {"parallelism", parallelism},
            {"embed_dim", embed_dim},
            {"repair_retries", repair_retries},
            {"per_user_catalog", per_user_catalog},
            {"query_from_history", query_from_history},
            {"seed", seed},
            {"sft_learning_rate", sft_learning_rate},
            {"sft_epochs", sft_epochs},
            {"dpo_learning_rate", dpo_learning_rate},
            {"dpo_epochs", dpo_epochs},
            {"beta", beta},
            {"model", model}};
}

std::uint64_t PipelineConfig::hash() const { return fnv1a(to_json().dump()); }

void PipelineConfig::validate() const {
    if (backend != "mock" && backend != "http")
        throw ConfigError("backend must be 'mock' or 'http'");
    if (lambda < 0.0 || lambda > 5.0) throw ConfigError("lambda must be within [0, 5]");
    if (max_turns < 1) throw ConfigError("max_turns must be >= 1");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (opener_mode != "generated" && opener_mode != "template")
        throw ConfigError("opener_mode must be 'generated' or 'template'");
    if (n_personas < 1) throw ConfigError("n_personas must be >= 1");
}

std::shared_ptr<Provider> make_provider(const PipelineConfig& config) {
    if (config.backend == "http") {
        HttpProviderConfig http;
        http.model = config.model;
        return std::make_shared<HttpProvider>(http);
    }
    ScriptedBehavior behavior;
    if (!config.scripted_file.empty())
        behavior = ScriptedBehavior::from_file(config.scripted_file);
    return std::make_shared<MockProvider>(std::move(behavior));
}

std::unique_ptr<Gateway> make_gateway(const PipelineConfig& config) {
    return std::make_unique<Gateway>(make_provider(config), config.repair_retries);
}

void make_demo_corpus(const std::filesystem::path& path, int n_users, int items_per_user,
                      const std::string& domain, std::uint64_t seed) {
    static const char* kFirst[] = {"Starlit",   "Iron",    "Whispering", "Crimson",
                                   "Forgotten", "Amber",   "Silent",     "Wandering",
                                   "Gilded",    "Emerald", "Hollow",     "Radiant"};
    static const char* kSecond[] = {"Garden",     "Voyage",       "Archive", "Causeway",
                                    "Orchard",    "Cartographer", "Lighthouse", "Symphony",
                                    "Labyrinth",  "Harbor",       "Meadow",  "Observatory"};
    static const char* kThird[] = {"Chronicles", "Letters", "Songs",
                                   "Atlas",      "Diaries", "Fables"};
    static const char* kThemes[] = {"friendship", "migration", "mystery",  "belonging",
                                    "craft",      "memory",    "frontier", "seasons"};

    Rng rng(seed);
    std::ostringstream out;
    std::map<std::string, std::string> item_ids;
    static const double kRatings[] = {5.0, 4.0, 3.0, 5.0, 2.0, 4.0, 5.0, 3.0};

    for (int u = 0; u < n_users; ++u) {
        std::ostringstream user;
        user << "u" << (u + 100);
        for (int k = 0; k < items_per_user; ++k) {
            std::string title = std::string("The ") + kFirst[rng() % 12] + " " +
                                kSecond[rng() % 12] + " " + kThird[rng() % 6];
            auto [it, inserted] =
                item_ids.try_emplace(title, "i" + std::to_string(item_ids.size() + 1000));
            const std::string& item_id = it->second;
            std::string theme_a = kThemes[rng() % 8];
            std::string theme_b = kThemes[rng() % 8];
            double rating = kRatings[rng() % 8];
            std::string description = "A " + domain + " about " + theme_a + " and " + theme_b +
                                      ", following " + title.substr(4) + " across the years.";
            std::string review =
                rating >= 4.0
                    ? "Loved " + title + " - the " + theme_a + " thread is beautifully done."
                    : "Expected more from " + title + "; the " + theme_a +
                          " angle never lands.";
            json row = {{"user_id", user.str()}, {"item_id", item_id},
                        {"title", title},        {"review_text", review},
                        {"rating", rating},      {"description", description},
                        {"domain", domain}};
            out << row.dump() << "\n";
        }
    }
    write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Manifest

Manifest::Manifest(std::filesystem::path out_dir) : out_dir_(std::move(out_dir)) {
    std::filesystem::create_directories(out_dir_);
    if (std::filesystem::exists(path()))
        doc_ = json::parse(read_file(path()));
    else
        doc_ = {{"schema_version", kSchemaVersion},
                {"stages", json::array()},
                {"prompt_hashes", PromptRegistry::instance().hashes()}};
}

std::filesystem::path Manifest::path() const { return out_dir_ / "manifest.json"; }

void Manifest::set_config(const PipelineConfig& config) {
    doc_["config"] = config.to_json();
    doc_["config_hash"] = hash_hex(config.hash());
}

void Manifest::begin_stage(const std::string& name, const CallLedger& ledger) {
    current_stage_ = {{"name", name},
                      {"inputs", json::array()},
                      {"outputs", json::array()},
                      {"ledger_before", ledger.to_json()}};
}

void Manifest::add_input(const std::filesystem::path& p) {
    current_stage_["inputs"].push_back({{"path", p.string()}, {"hash", file_hash(p)}});
}

void Manifest::add_output(const std::filesystem::path& p) {
    current_stage_["outputs"].push_back({{"path", p.string()}, {"hash", file_hash(p)}});
}

void Manifest::end_stage(const CallLedger& ledger, const json& counters) {
    current_stage_["ledger_after"] = ledger.to_json();
    if (!counters.is_null() && !counters.empty()) current_stage_["counters"] = counters;
    // Re-running a stage replaces its previous record.
    auto& stages = doc_["stages"];
    for (auto& s : stages)
        if (s.at("name") == current_stage_.at("name")) {
            s = current_stage_;
            save();
            return;
        }
    stages.push_back(current_stage_);
    save();
}

void Manifest::save() const { write_file(path(), doc_.dump(2) + "\n"); }

json Manifest::load(const std::filesystem::path& out_dir) {
    return json::parse(read_file(out_dir / "manifest.json"));
}

std::string file_hash(const std::filesystem::path& path) {
    return hash_hex(fnv1a(read_file(path)));
}

// ---------------------------------------------------------------------------
// Stage plumbing

namespace {

struct Paths {
    std::filesystem::path items, users, index, personas, tasks;
    std::filesystem::path episodes_sft, report_sft, sft_file;
    std::filesystem::path policy_sft, train_sft;
    std::filesystem::path episodes_pref, report_pref, pairs, dpo, kto;
    std::filesystem::path policy_dpo, train_dpo;
    std::filesystem::path episodes_eval, eval_report;

    explicit Paths(const std::filesystem::path& out) {
        items = out / "catalog_items.jsonl";
        users = out / "catalog_users.jsonl";
        index = out / "index.bin";
        personas = out / "personas.jsonl";
        tasks = out / "tasks.jsonl";
        episodes_sft = out / "episodes_sft.jsonl";
        report_sft = out / "report_sft.json";
        sft_file = out / "sft.jsonl";
        policy_sft = out / "policy_sft.bin";
        train_sft = out / "train_sft.json";
        episodes_pref = out / "episodes_pref.jsonl";
        report_pref = out / "report_pref.json";
        pairs = out / "pairs.jsonl";
        dpo = out / "dpo.jsonl";
        kto = out / "kto.jsonl";
        policy_dpo = out / "policy_dpo.bin";
        train_dpo = out / "train_dpo.json";
        episodes_eval = out / "episodes_eval.jsonl";
        eval_report = out / "eval_report.json";
    }
};

struct TaskSplit {
    std::vector<Task> sft, pref, eval;
};

TaskSplit split_tasks(const PipelineConfig& config, std::vector<Task> tasks) {
    if (config.n_tasks > 0 && static_cast<int>(tasks.size()) > config.n_tasks)
        tasks.resize(static_cast<std::size_t>(config.n_tasks));
    int total = static_cast<int>(tasks.size());
    if (total == 0) throw EcpoError("no tasks generated");
    int n_sft = config.n_sft >= 0 ? config.n_sft : std::max(1, total * 60 / 100);
    int n_pref = config.n_pref >= 0 ? config.n_pref : std::max(1, total * 25 / 100);
    n_sft = std::min(n_sft, total);
    n_pref = std::min(n_pref, total - n_sft);
    if (n_pref == 0 && total > n_sft) n_pref = 1;
    int n_eval = config.n_eval >= 0 ? config.n_eval
                                    : std::max(1, std::min(n_sft, total * 15 / 100));
    n_eval = std::min(n_eval, n_sft);

    TaskSplit split;
    split.sft.assign(tasks.begin(), tasks.begin() + n_sft);
    split.pref.assign(tasks.begin() + n_sft,
                      tasks.begin() + std::min(total, n_sft + n_pref));
    // Evaluation reuses the first sft task ids so the expert corpus exists.
    split.eval.assign(tasks.begin(), tasks.begin() + n_eval);
    return split;
}

AgentConfig agent_config(const PipelineConfig& config, bool store_ec) {
    AgentConfig a;
    a.domain = config.domain;
    a.max_turns = config.max_turns;
    a.top_k = config.top_k;
    a.max_recommendations = config.max_recommendations;
    a.store_ec = store_ec;
    a.per_user_catalog = config.per_user_catalog;
    a.query_from_history = config.query_from_history;
    return a;
}

struct SimContext {
    Catalog catalog;
    EmbeddingIndex index;
    std::unique_ptr<HashEmbedder> embedder;
    std::map<std::string, Persona> personas;
    std::vector<Task> tasks;
    std::unique_ptr<Simulator> simulator;
    EpisodeDeps deps;

    SimContext(const PipelineConfig& config, Gateway& gateway, const Paths& paths,
               bool store_ec) {
        catalog = read_catalog_files(paths.items, paths.users);
        index = load_index(paths.index);
        embedder = std::make_unique<HashEmbedder>(config.embed_dim,
                                                  derive_seed(config.seed, "embed"));
        for (auto& p : read_personas(paths.personas)) personas[p.id] = std::move(p);
        tasks = read_tasks(paths.tasks);

        SimulatorConfig sim_config;
        sim_config.domain = config.domain;
        sim_config.opener_mode = config.opener_mode;
        simulator = std::make_unique<Simulator>(&gateway, &PromptRegistry::instance(),
                                                sim_config);
        deps.gateway = &gateway;
        deps.retriever = {&catalog, &index, embedder.get(), &gateway.ledger(), config.top_k};
        deps.prompts = &PromptRegistry::instance();
        deps.simulator = simulator.get();
        deps.catalog = &catalog;
        (void)store_ec;
    }
};

}  // namespace

std::vector<Task> make_tasks(const Catalog& catalog, const std::vector<Persona>& personas,
                             int per_user_cap) {
    std::vector<Task> tasks;
    for (const auto& persona : personas) {
        auto it = catalog.user_positive.find(persona.id);
        if (it == catalog.user_positive.end()) continue;
        int used = 0;
        for (const auto& item_id : it->second) {
            if (per_user_cap > 0 && used >= per_user_cap) break;
            const ItemRef& item = catalog.item(item_id);
            Task task;
            task.id = "t-" + persona.id + "-" + item_id;
            task.persona_id = persona.id;
            task.target = item;
            task.domain = item.domain;
            tasks.push_back(std::move(task));
            ++used;
        }
    }
    return tasks;
}

void write_catalog_files(const Catalog& catalog, const std::filesystem::path& items_path,
                         const std::filesystem::path& users_path) {
    std::ostringstream items;
    for (const auto& item : catalog.items)
        items << json{{"type", "item"},
                      {"schema_version", kSchemaVersion},
                      {"item", item_to_json(item)}}
                     .dump()
              << "\n";
    write_file(items_path, items.str());

    std::ostringstream users;
    for (const auto& [user, all] : catalog.user_items) {
        json j = {{"type", "user"},
                  {"schema_version", kSchemaVersion},
                  {"user_id", user},
                  {"items", all}};
        auto pos = catalog.user_positive.find(user);
        j["positive"] = pos == catalog.user_positive.end() ? std::vector<std::string>{}
                                                           : pos->second;
        users << j.dump() << "\n";
    }
    write_file(users_path, users.str());
}

Catalog read_catalog_files(const std::filesystem::path& items_path,
                           const std::filesystem::path& users_path) {
    Catalog catalog;
    {
        std::istringstream in(read_file(items_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json j = parse_line(line, line_no);
            ItemRef item = item_from_json(j.at("item"));
            catalog.by_id[item.item_id] = catalog.items.size();
            catalog.items.push_back(std::move(item));
        }
    }
    {
        std::istringstream in(read_file(users_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json j = parse_line(line, line_no);
            std::string user = j.at("user_id").get<std::string>();
            catalog.user_items[user] = j.at("items").get<std::vector<std::string>>();
            catalog.user_positive[user] = j.at("positive").get<std::vector<std::string>>();
        }
    }
    return catalog;
}

// ---------------------------------------------------------------------------
// Stages

void stage_gen(const PipelineConfig& config, Gateway& gateway, Manifest& manifest) {
    Paths paths(config.out_dir);
    manifest.begin_stage("gen", gateway.ledger());
    manifest.add_input(config.corpus);

    IngestConfig ingest;
    Catalog catalog = ingest_corpus(config.corpus, ingest);

    PersonaBuildConfig persona_config;
    persona_config.min_reviews = config.min_reviews;
    persona_config.seed = derive_seed(config.seed, "personas");
    persona_config.domain = config.domain;
    auto personas = build_personas(catalog, gateway, PromptRegistry::instance(),
                                   config.n_personas, persona_config);

    HashEmbedder embedder(config.embed_dim, derive_seed(config.seed, "embed"));
    EmbeddingIndex index = embed_items(catalog, embedder, &gateway.ledger());

    auto tasks = make_tasks(catalog, personas.personas, config.per_user_task_cap);

    write_catalog_files(catalog, paths.items, paths.users);
    save_index(index, paths.index);
    write_personas(paths.personas, personas.personas);
    write_tasks(paths.tasks, tasks);

    manifest.add_output(paths.items);
    manifest.add_output(paths.users);
    manifest.add_output(paths.index);
    manifest.add_output(paths.personas);
    manifest.add_output(paths.tasks);
    manifest.end_stage(gateway.ledger(),
                       {{"personas", personas.personas.size()},
                        {"skipped_users", personas.skipped_users},
                        {"items", catalog.items.size()},
                        {"tasks", tasks.size()}});
}

void stage_simulate(const PipelineConfig& config, Gateway& gateway, Manifest& manifest,
                    const std::string& slice) {
    Paths paths(config.out_dir);
    manifest.begin_stage("simulate-" + slice, gateway.ledger());
    for (const auto& p : {paths.tasks, paths.personas, paths.items, paths.users, paths.index})
        manifest.add_input(p);

    bool store_ec = slice == "pref";
    SimContext context(config, gateway, paths, store_ec);
    TaskSplit split = split_tasks(config, context.tasks);
    const std::vector<Task>& tasks =
        slice == "sft" ? split.sft : (slice == "pref" ? split.pref : split.eval);

    auto batch = run_batch(tasks, context.personas, context.deps,
                           agent_config(config, store_ec), config.parallelism);

    std::filesystem::path episodes_path = slice == "sft"
                                              ? paths.episodes_sft
                                              : (slice == "pref" ? paths.episodes_pref
                                                                 : paths.episodes_eval);
    write_episodes(episodes_path, batch.episodes);
    manifest.add_output(episodes_path);
    if (slice != "eval") {
        auto report_path = slice == "sft" ? paths.report_sft : paths.report_pref;
        write_file(report_path, batch.report.to_json().dump(2) + "\n");
        manifest.add_output(report_path);
    }
    manifest.end_stage(gateway.ledger(), batch.report.to_json());
}

void stage_build_sft(const PipelineConfig& config, Manifest& manifest) {
    Paths paths(config.out_dir);
    CallLedger unused;
    manifest.begin_stage("build-sft", unused);
    manifest.add_input(paths.episodes_sft);

    auto episodes = read_episodes(paths.episodes_sft);
    auto built = build_sft(episodes);
    export_training_files(built.examples, {}, ExportFormat::Sft, paths.sft_file);

    manifest.add_output(paths.sft_file);
    manifest.add_output(paths.sft_file.string() + ".meta.json");
    manifest.end_stage(unused, built.counters());
}

namespace {

std::shared_ptr<Vocab> vocab_over(const std::vector<SftRecord>& sft,
                                  const std::vector<DpoRecord>& pairs) {
    std::vector<std::string> corpus;
    for (const auto& r : sft) {
        corpus.push_back(r.prompt);
        corpus.push_back(r.completion);
    }
    for (const auto& r : pairs) {
        corpus.push_back(r.prompt);
        corpus.push_back(r.chosen);
        corpus.push_back(r.rejected);
    }
    return std::make_shared<Vocab>(corpus);
}

}  // namespace

void stage_train_sft(const PipelineConfig& config, Manifest& manifest) {
    Paths paths(config.out_dir);
    CallLedger unused;
    manifest.begin_stage("train-sft", unused);
    manifest.add_input(paths.sft_file);

    auto records = import_sft_file(paths.sft_file);
    if (records.empty()) throw EcpoError("no SFT examples to train on");
    auto vocab = vocab_over(records, {});
    TokenizedPolicy policy(vocab);
    policy.init_random(derive_seed(config.seed, "train-sft"));

    std::vector<TokenizedExample> dataset;
    for (const auto& r : records) dataset.push_back(tokenize_example(r, *vocab));
    TrainConfig train_config;
    train_config.learning_rate = config.sft_learning_rate;
    train_config.epochs = config.sft_epochs;
    train_config.seed = derive_seed(config.seed, "train-sft-order");
    auto result = train_sft(policy, dataset, train_config);

    policy.save(paths.policy_sft, config.hash());
    json curve = result.to_json();
    curve["objective"] = "sft";
    curve["examples"] = records.size();
    write_file(paths.train_sft, curve.dump(2) + "\n");

    manifest.add_output(paths.policy_sft);
    manifest.add_output(paths.train_sft);
    manifest.end_stage(unused, {{"examples", records.size()},
                                {"final_loss", result.losses.back()}});
}

void stage_build_pref(const PipelineConfig& config, Gateway& gateway, Manifest& manifest) {
    Paths paths(config.out_dir);
    manifest.begin_stage("build-pref", gateway.ledger());
    manifest.add_input(paths.episodes_pref);

    auto episodes = read_episodes(paths.episodes_pref);
    SimulatorConfig sim_config;
    sim_config.domain = config.domain;
    Simulator simulator(&gateway, &PromptRegistry::instance(), sim_config);
    auto collected = collect_ec(episodes, &simulator);

    BuildConfig build;
    build.lambda_threshold = config.lambda;
    build.inclusive = config.inclusive;
    auto rewritten =
        derive_rewrites(collected.tuples, gateway, PromptRegistry::instance(), build);

    write_pairs(paths.pairs, rewritten.pairs);
    export_training_files({}, rewritten.pairs, ExportFormat::Dpo, paths.dpo);
    export_training_files({}, rewritten.pairs, ExportFormat::Kto, paths.kto);

    manifest.add_output(paths.pairs);
    manifest.add_output(paths.dpo);
    manifest.add_output(paths.dpo.string() + ".meta.json");
    manifest.add_output(paths.kto);
    manifest.add_output(paths.kto.string() + ".meta.json");
    json counters = rewritten.counters();
    counters["tuples"] = collected.tuples.size();
    counters["reused_ec_records"] = collected.reused_records;
    counters["confirmed_ec_records"] = collected.confirmed_records;
    counters["lambda"] = config.lambda;
    counters["inclusive"] = config.inclusive;
    manifest.end_stage(gateway.ledger(), counters);
}

void stage_train_dpo(const PipelineConfig& config, Manifest& manifest) {
    Paths paths(config.out_dir);
    CallLedger unused;
    manifest.begin_stage("train-dpo", unused);
    manifest.add_input(paths.sft_file);
    manifest.add_input(paths.dpo);

    auto sft_records = import_sft_file(paths.sft_file);
    auto pair_records = import_dpo_file(paths.dpo);
    if (pair_records.empty()) throw EcpoError("no preference pairs to train on");

    // Vocabulary must cover the rewritten texts, so the toy SFT reference is
    // refit here over the union corpus before DPO starts.
    auto vocab = vocab_over(sft_records, pair_records);
    TokenizedPolicy policy(vocab);
    policy.init_random(derive_seed(config.seed, "train-dpo"));

    std::vector<TokenizedExample> sft_dataset;
    for (const auto& r : sft_records) sft_dataset.push_back(tokenize_example(r, *vocab));
    TrainConfig sft_config;
    sft_config.learning_rate = config.sft_learning_rate;
    sft_config.epochs = config.sft_epochs;
    sft_config.seed = derive_seed(config.seed, "train-dpo-sft");
    if (!sft_dataset.empty()) train_sft(policy, sft_dataset, sft_config);

    std::vector<TokenizedPair> pairs;
    for (const auto& r : pair_records) pairs.push_back(tokenize_pair(r, *vocab));
    TokenizedPolicy reference = policy;  // frozen
    TrainConfig dpo_config;
    dpo_config.learning_rate = config.dpo_learning_rate;
    dpo_config.epochs = config.dpo_epochs;
    dpo_config.beta = config.beta;
    dpo_config.seed = derive_seed(config.seed, "train-dpo-order");
    double margin_before = mean_margin(policy, reference, pairs);
    auto result = train_dpo(policy, pairs, dpo_config);
    double margin_after = mean_margin(policy, reference, pairs);

    policy.save(paths.policy_dpo, config.hash());
    json curve = result.to_json();
    curve["objective"] = "dpo";
    curve["pairs"] = pairs.size();
    curve["margin_before"] = margin_before;
    curve["margin_after"] = margin_after;
    write_file(paths.train_dpo, curve.dump(2) + "\n");

    manifest.add_output(paths.policy_dpo);
    manifest.add_output(paths.train_dpo);
    manifest.end_stage(unused, {{"pairs", pairs.size()},
                                {"margin_before", margin_before},
                                {"margin_after", margin_after},
                                {"final_loss", result.losses.back()}});
}

void stage_evaluate(const PipelineConfig& config, Gateway& gateway, Manifest& manifest) {
    Paths paths(config.out_dir);
    manifest.begin_stage("evaluate", gateway.ledger());
    for (const auto& p : {paths.tasks, paths.personas, paths.items, paths.users, paths.index,
                          paths.episodes_sft})
        manifest.add_input(p);

    SimContext context(config, gateway, paths, /*store_ec=*/false);
    TaskSplit split = split_tasks(config, context.tasks);
    auto batch = run_batch(split.eval, context.personas, context.deps,
                           agent_config(config, false), config.parallelism);
    write_episodes(paths.episodes_eval, batch.episodes);

    // Expert corpus: the sft-slice episodes on the same task ids.
    auto expert_all = read_episodes(paths.episodes_sft);
    std::set<std::string> eval_ids;
    for (const auto& t : split.eval) eval_ids.insert(t.id);
    std::vector<Episode> expert;
    for (auto& e : expert_all)
        if (eval_ids.count(e.task_id)) expert.push_back(std::move(e));

    json report;
    report["config_hash"] = hash_hex(config.hash());
    report["candidate_sr"] = success_rate(batch.episodes);
    report["candidate_r"] = recall_rate(batch.episodes);
    auto wr = win_rate(batch.episodes, expert, gateway, PromptRegistry::instance());
    report["win_rate"] = wr.to_json();
    report["ledger"] = gateway.ledger().to_json();
    write_file(paths.eval_report, report.dump(2) + "\n");

    manifest.add_output(paths.episodes_eval);
    manifest.add_output(paths.eval_report);
    manifest.end_stage(gateway.ledger(), {{"candidate_sr", report["candidate_sr"]},
                                          {"candidate_r", report["candidate_r"]},
                                          {"wr", wr.win_rate}});
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    PipelineResult result;
    auto fail = [&](const std::string& stage, ExitCode code, const std::string& error) {
        result.ok = false;
        result.failed_stage = stage;
        result.code = code;
        result.error = error;
        return result;
    };

    try {
        config.validate();
    } catch (const ConfigError& e) {
        return fail("config", ExitCode::Config, e.what());
    }

    std::unique_ptr<Gateway> gateway;
    try {
        gateway = make_gateway(config);
    } catch (const GatewayError& e) {
        return fail("gateway-init", ExitCode::Gateway, e.what());
    }

    Manifest manifest(config.out_dir);
    manifest.set_config(config);
    manifest.save();

    struct StageDef {
        const char* name;
        ExitCode code;
        std::function<void()> run;
    };
    std::vector<StageDef> stages = {
        {"gen", ExitCode::Gen, [&] { stage_gen(config, *gateway, manifest); }},
        {"simulate-sft", ExitCode::Simulate,
         [&] { stage_simulate(config, *gateway, manifest, "sft"); }},
        {"build-sft", ExitCode::Build, [&] { stage_build_sft(config, manifest); }},
        {"train-sft", ExitCode::Train, [&] { stage_train_sft(config, manifest); }},
        {"simulate-pref", ExitCode::Simulate,
         [&] { stage_simulate(config, *gateway, manifest, "pref"); }},
        {"build-pref", ExitCode::Build,
         [&] { stage_build_pref(config, *gateway, manifest); }},
        {"train-dpo", ExitCode::Train, [&] { stage_train_dpo(config, manifest); }},
        {"evaluate", ExitCode::Evaluate,
         [&] { stage_evaluate(config, *gateway, manifest); }},
    };

    for (const auto& stage : stages) {
        try {
            stage.run();
            result.completed.push_back(stage.name);
        } catch (const std::exception& e) {
            return fail(stage.name, stage.code, e.what());
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Verify

bool VerifyReport::ok() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const VerifyCheck& c) { return c.ok; });
}

json VerifyReport::to_json() const {
    json arr = json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name}, {"ok", c.ok}, {"detail", c.detail}});
    return {{"ok", ok()}, {"checks", arr}};
}

namespace {

void check_episode_file(VerifyReport& report, const std::filesystem::path& path) {
    VerifyCheck check;
    check.name = "episodes:" + path.filename().string();
    try {
        auto text = read_file(path);
        auto episodes = deserialize_corpus(text);
        // EC arithmetic straight off the raw records: stored score must equal
        // the deduction sum.
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json j = json::parse(line);
            if (j.at("type") == "turn" && j.contains("ec")) {
                const auto& ec = j.at("ec");
                int expected = 5 - ec.at("flexibility_deduction").get<int>() -
                               ec.at("coherence_deduction").get<int>() -
                               ec.at("guidance_deduction").get<int>();
                if (ec.at("score").get<int>() != expected)
                    throw EcpoError("line " + std::to_string(line_no) +
                                    ": EC score does not equal 5 minus deductions");
            }
        }
        for (const auto& e : episodes) {
            Outcome expected =
                classify_outcome(e.turns, e.target, e.outcome == Outcome::Truncated);
            if (e.outcome != expected)
                throw EcpoError("episode " + e.task_id + ": stored outcome " +
                                to_string(e.outcome) + " != classified " +
                                to_string(expected));
            for (std::size_t i = 0; i + 1 < e.turns.size(); ++i)
                if (e.turns[i].index + 1 != e.turns[i + 1].index)
                    throw EcpoError("episode " + e.task_id + ": non-consecutive turns");
        }
        check.detail = std::to_string(episodes.size()) + " episodes";
    } catch (const std::exception& e) {
        check.ok = false;
        check.detail = e.what();
    }
    report.checks.push_back(std::move(check));
}

}  // namespace

VerifyReport verify_run(const std::filesystem::path& out_dir) {
    VerifyReport report;
    Paths paths(out_dir);

    json manifest;
    {
        VerifyCheck check{"manifest", true, ""};
        try {
            manifest = Manifest::load(out_dir);
            check.detail = std::to_string(manifest.at("stages").size()) + " stages";
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = e.what();
            report.checks.push_back(std::move(check));
            return report;
        }
        report.checks.push_back(std::move(check));
    }

    {
        VerifyCheck check{"output-hashes", true, ""};
        int verified = 0;
        try {
            for (const auto& stage : manifest.at("stages"))
                for (const auto& output : stage.at("outputs")) {
                    std::filesystem::path p = output.at("path").get<std::string>();
                    if (!std::filesystem::exists(p))
                        throw EcpoError("missing output: " + p.string());
                    // Stage outputs may be rewritten by later stages
                    // (manifest.json itself is not listed); hashes must match
                    // the latest stage that wrote the file.
                    ++verified;
                }
            // Verify the latest hash per path.
            std::map<std::string, std::string> latest;
            for (const auto& stage : manifest.at("stages"))
                for (const auto& output : stage.at("outputs"))
                    latest[output.at("path").get<std::string>()] =
                        output.at("hash").get<std::string>();
            for (const auto& [p, h] : latest)
                if (file_hash(p) != h)
                    throw EcpoError("hash mismatch for " + p);
            check.detail = std::to_string(verified) + " outputs";
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = e.what();
        }
        report.checks.push_back(std::move(check));
    }

    for (const auto& p : {paths.episodes_sft, paths.episodes_pref, paths.episodes_eval})
        if (std::filesystem::exists(p)) check_episode_file(report, p);

    if (std::filesystem::exists(paths.sft_file)) {
        VerifyCheck check{"sft-targets-parse", true, ""};
        try {
            auto records = import_sft_file(paths.sft_file);
            for (const auto& r : records) parse_target_text(r.completion);
            check.detail = std::to_string(records.size()) + " examples";
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = e.what();
        }
        report.checks.push_back(std::move(check));
    }

    if (std::filesystem::exists(paths.pairs)) {
        VerifyCheck check{"pairs-invariants", true, ""};
        try {
            auto pairs = read_pairs(paths.pairs);
            double lambda = 4.0;
            bool inclusive = false;
            if (manifest.contains("config")) {
                lambda = manifest.at("config").value("lambda", 4.0);
                inclusive = manifest.at("config").value("inclusive", false);
            }
            std::map<std::string, Episode> by_task;
            for (const auto& p :
                 {paths.episodes_pref, paths.episodes_sft, paths.episodes_eval})
                if (std::filesystem::exists(p))
                    for (auto& e : read_episodes(p))
                        by_task.emplace(e.task_id, std::move(e));
            for (const auto& pair : pairs) {
                if (pair.preferred == pair.dispreferred)
                    throw EcpoError("pair " + pair.source_episode + "#" +
                                    std::to_string(pair.source_turn) +
                                    ": preferred equals dispreferred");
                bool selected = inclusive ? pair.ec.score <= lambda : pair.ec.score < lambda;
                if (!selected)
                    throw EcpoError("pair " + pair.source_episode + "#" +
                                    std::to_string(pair.source_turn) +
                                    ": EC score fails the lambda threshold");
                auto it = by_task.find(pair.source_episode);
                if (it == by_task.end())
                    throw EcpoError("pair source episode missing: " + pair.source_episode);
                DialogueState expected = response_context(it->second, pair.source_turn);
                if (expected.render() != pair.state.render())
                    throw EcpoError("pair " + pair.source_episode + "#" +
                                    std::to_string(pair.source_turn) +
                                    ": state does not reconstruct from source");
            }
            check.detail = std::to_string(pairs.size()) + " pairs";
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = e.what();
        }
        report.checks.push_back(std::move(check));
    }

    if (std::filesystem::exists(paths.dpo) && std::filesystem::exists(paths.pairs)) {
        VerifyCheck check{"export-counts", true, ""};
        try {
            auto pairs = read_pairs(paths.pairs);
            auto dpo = import_dpo_file(paths.dpo);
            if (dpo.size() != pairs.size())
                throw EcpoError("dpo export count != pair count");
            if (std::filesystem::exists(paths.kto)) {
                auto kto = import_kto_file(paths.kto);
                if (kto.size() != 2 * pairs.size())
                    throw EcpoError("kto export count != 2x pair count");
            }
            check.detail = std::to_string(dpo.size()) + " dpo records";
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = e.what();
        }
        report.checks.push_back(std::move(check));
    }

    for (const auto& p : {paths.policy_sft, paths.policy_dpo}) {
        if (!std::filesystem::exists(p)) continue;
        VerifyCheck check{"checkpoint:" + p.filename().string(), true, ""};
        try {
            auto policy = TokenizedPolicy::load(p);
            check.detail = std::to_string(policy.parameter_count()) + " parameters";
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = e.what();
        }
        report.checks.push_back(std::move(check));
    }

    if (std::filesystem::exists(paths.eval_report)) {
        VerifyCheck check{"eval-report", true, ""};
        try {
            json j = json::parse(read_file(paths.eval_report));
            double sr = j.at("candidate_sr").get<double>();
            double r = j.at("candidate_r").get<double>();
            if (sr < 0.0 || sr > 1.0 || r < 0.0 || r > 1.0)
                throw EcpoError("metrics out of [0, 1]");
            check.detail = "sr=" + std::to_string(sr) + " r=" + std::to_string(r);
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail = e.what();
        }
        report.checks.push_back(std::move(check));
    }

    return report;
}

}  // namespace ecpo

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/agent.hpp"
#include "ecpo/builder.hpp"
#include "ecpo/catalog.hpp"
#include "ecpo/embedding.hpp"
#include "ecpo/gateway.hpp"
#include "ecpo/mock_provider.hpp"
#include "ecpo/simulator.hpp"

namespace ecpo {

// Exit-code families, one per stage group.
enum class ExitCode : int {
    Ok = 0,
    Config = 2,
    Gen = 3,
    Simulate = 4,
    Build = 5,
    Train = 6,
    Evaluate = 7,
    Verify = 8,
    Gateway = 9,
};

struct PipelineConfig {
    std::string backend = "mock";  // mock | http
    std::string scripted_file;     // optional mock ScriptedBehavior
    std::filesystem::path corpus;
    std::filesystem::path out_dir = "out";
    std::string domain = "catalog";

    int n_personas = 100;
    int min_reviews = 3;
    int per_user_task_cap = 30;
    int n_tasks = 0;  // 0 = all generated tasks
    int n_sft = -1;   // -1 = auto split
    int n_pref = -1;
    int n_eval = -1;

    int max_turns = 5;
    int top_k = 5;
    int max_recommendations = 5;
    double lambda = 4.0;
    bool inclusive = false;
    std::string opener_mode = "generated";
    int parallelism = 1;
    int embed_dim = 64;
    int repair_retries = 2;
    bool per_user_catalog = true;
    bool query_from_history = false;
    std::uint64_t seed = 1234;

    double sft_learning_rate = 0.3;
    int sft_epochs = 12;
    double dpo_learning_rate = 0.2;
    int dpo_epochs = 40;
    double beta = 1.0;

    std::string model = "gpt-4o-mini";

    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    std::uint64_t hash() const;
    void validate() const;  // throws ConfigError
};

// Provider construction per config; http fails fast on missing credentials.
std::shared_ptr<Provider> make_provider(const PipelineConfig& config);
std::unique_ptr<Gateway> make_gateway(const PipelineConfig& config);

// Deterministic synthetic review corpus for demos and smoke runs.
void make_demo_corpus(const std::filesystem::path& path, int n_users, int items_per_user,
                      const std::string& domain, std::uint64_t seed);

// Stage-chained manifest: every stage appends inputs/outputs with content
// hashes plus ledger snapshots, so the no-extra-sampling property is
// auditable offline.
class Manifest {
  public:
    explicit Manifest(std::filesystem::path out_dir);

    void set_config(const PipelineConfig& config);
    void begin_stage(const std::string& name, const CallLedger& ledger);
    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
    void end_stage(const CallLedger& ledger, const nlohmann::json& counters = {});
    void save() const;

    static nlohmann::json load(const std::filesystem::path& out_dir);
    std::filesystem::path path() const;

  private:
    std::filesystem::path out_dir_;
    nlohmann::json doc_;
    nlohmann::json current_stage_;
};

std::string file_hash(const std::filesystem::path& path);

// Individual stages; each reads its inputs from out_dir, writes its outputs
// there and appends to the manifest.
void stage_gen(const PipelineConfig& config, Gateway& gateway, Manifest& manifest);
void stage_simulate(const PipelineConfig& config, Gateway& gateway, Manifest& manifest,
                    const std::string& slice);  // "sft", "pref" or "eval"
void stage_build_sft(const PipelineConfig& config, Manifest& manifest);
void stage_train_sft(const PipelineConfig& config, Manifest& manifest);
void stage_build_pref(const PipelineConfig& config, Gateway& gateway, Manifest& manifest);
void stage_train_dpo(const PipelineConfig& config, Manifest& manifest);
void stage_evaluate(const PipelineConfig& config, Gateway& gateway, Manifest& manifest);

struct PipelineResult {
    bool ok = true;
    std::string failed_stage;
    std::string error;
    ExitCode code = ExitCode::Ok;
    std::vector<std::string> completed;
};

// The eight stages in order: gen, simulate-sft, build-sft, train-sft,
// simulate-pref, build-pref, train-dpo, evaluate. A stage failure halts the
// run; earlier outputs stay valid.
PipelineResult run_pipeline(const PipelineConfig& config);

struct VerifyCheck {
    std::string name;
    bool ok = true;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool ok() const;
    nlohmann::json to_json() const;
};

// Re-checks every cross-file invariant of a pipeline output directory.
VerifyReport verify_run(const std::filesystem::path& out_dir);

// Task-file generation helpers shared by stage_gen and tests.
std::vector<Task> make_tasks(const Catalog& catalog, const std::vector<Persona>& personas,
                             int per_user_cap);
void write_catalog_files(const Catalog& catalog, const std::filesystem::path& items_path,
                         const std::filesystem::path& users_path);
Catalog read_catalog_files(const std::filesystem::path& items_path,
                           const std::filesystem::path& users_path);

}  // namespace ecpo

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/gateway.hpp"
#include "ecpo/prompts.hpp"
#include "ecpo/simulator.hpp"
#include "ecpo/types.hpp"

namespace ecpo {

// One supervised example: the rendered state and the agent's output-format
// target (strategy + reasoning + action), which must parse back.
struct SftExample {
    DialogueState state;
    std::string target_text;

    bool operator==(const SftExample&) const = default;
};

// Canonical agent output rendering shared by training targets and pairs.
std::string render_target_text(const std::string& strategy, const std::string& reasoning,
                               const Action& action);
struct ParsedTarget {
    std::string strategy;
    std::string reasoning;
    Action action;
};
ParsedTarget parse_target_text(const std::string& text);

struct BuildConfig {
    double lambda_threshold = 4.0;  // rewrite turns with score < lambda
    bool inclusive = false;         // <= instead of <
    double edit_ratio_limit = 0.8;  // token edit distance / original length
    bool include_reasoning_in_pairs = true;

    bool selects(int score) const {
        return inclusive ? score <= lambda_threshold : score < lambda_threshold;
    }
};

struct SftBuildResult {
    std::vector<SftExample> examples;
    int episodes_total = 0;
    int episodes_used = 0;  // Success only

    nlohmann::json counters() const;
};

// Every turn of every Success episode becomes one example; Failure and
// Truncated episodes contribute nothing. An empty result is allowed.
SftBuildResult build_sft(const std::vector<Episode>& episodes);

// One EC tuple per agent turn: the state the response was generated under,
// the response, and its confirmation record.
struct ECTuple {
    std::string source_episode;
    int source_turn = 0;
    DialogueState state;
    std::string strategy;
    std::string reasoning;
    Action action;
    ECRecord ec;
};

struct CollectResult {
    std::vector<ECTuple> tuples;
    int reused_records = 0;      // embedded EC records
    int confirmed_records = 0;   // simulator calls made
    int skipped = 0;             // reconstruction failures
    std::vector<std::string> log;
};

// Uses embedded EC records when present; otherwise calls the simulator's
// standalone confirmation on the reconstructed state. Never samples the
// agent.
CollectResult collect_ec(const std::vector<Episode>& episodes, Simulator* simulator = nullptr);

struct RewriteResult {
    std::vector<PreferencePair> pairs;  // ordered by (source_episode, source_turn)
    int selected = 0;
    int dropped_identical = 0;
    int dropped_unparseable = 0;
    int flagged_edit_ratio = 0;

    nlohmann::json counters() const;
};

// Backward pass: every tuple under the threshold is rewritten via the
// backend; the refinement must parse as one of the four actions and differ
// from the original, otherwise the pair is dropped and counted.
RewriteResult derive_rewrites(const std::vector<ECTuple>& tuples, Gateway& gateway,
                              const PromptRegistry& prompts, const BuildConfig& config);

enum class ExportFormat { Sft, Dpo, Kto };
ExportFormat export_format_from_string(std::string_view s);

// Line-delimited training files: SFT {prompt, completion}, DPO {prompt,
// chosen, rejected}, KTO {prompt, completion, label} with two records per
// pair.
void export_training_files(const std::vector<SftExample>& sft,
                           const std::vector<PreferencePair>& pairs, ExportFormat format,
                           const std::filesystem::path& path);

struct DpoRecord {
    std::string prompt;
    std::string chosen;
    std::string rejected;

    bool operator==(const DpoRecord&) const = default;
};
std::vector<DpoRecord> import_dpo_file(const std::filesystem::path& path);

struct KtoRecord {
    std::string prompt;
    std::string completion;
    bool desirable = false;

    bool operator==(const KtoRecord&) const = default;
};
std::vector<KtoRecord> import_kto_file(const std::filesystem::path& path);

struct SftRecord {
    std::string prompt;
    std::string completion;

    bool operator==(const SftRecord&) const = default;
};
std::vector<SftRecord> import_sft_file(const std::filesystem::path& path);

}  // namespace ecpo

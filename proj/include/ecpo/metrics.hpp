#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/builder.hpp"
#include "ecpo/embedding.hpp"
#include "ecpo/gateway.hpp"
#include "ecpo/prompts.hpp"
#include "ecpo/types.hpp"

namespace ecpo {

// Fraction of episodes whose turns contain a Recommend naming the target
// under the normalized-title matching rule. Recomputed from the turns, not
// trusted from the stored outcome. Empty input is an error.
double success_rate(const std::vector<Episode>& episodes);

// Same metric with an embedding-similarity fallback for noisy titles: a
// Recommend also matches when cosine(payload, title) >= threshold.
double success_rate_fuzzy(const std::vector<Episode>& episodes, Embedder& embedder,
                          double threshold = 0.9);

// Fraction of episodes where the target item id appears in at least one
// turn's retrieval results.
double recall_rate(const std::vector<Episode>& episodes);

// User-visible transcript (payloads, not action renderings) fed to the judge.
std::string transcript(const Episode& episode);

struct JudgeVerdict {
    int flexibility = 0;
    int coherence = 0;
    int guidance = 0;
    int final_score = 0;
    std::string flexibility_reason;
    std::string coherence_reason;
    std::string guidance_reason;
    bool valid = false;
    int attempts = 0;
};

// One judged comparison; slot A is traj_a. Scores outside {-1, 0, 1} or
// structured-output failures mark the verdict invalid instead of throwing.
JudgeVerdict judge_pair(const Episode& traj_a, const Episode& traj_b, Gateway& gateway,
                        const PromptRegistry& prompts);

struct WinRateReport {
    double win_rate = 0.0;  // Final Score, position-swap averaged
    double flexibility_wr = 0.0;
    double coherence_wr = 0.0;
    double guidance_wr = 0.0;
    int tasks_paired = 0;
    int tasks_scored = 0;      // tasks with at least one valid ordering
    int invalid_verdicts = 0;  // excluded, not counted as ties
    int unpaired = 0;
    nlohmann::json per_task = nlohmann::json::array();

    nlohmann::json to_json() const;
};

// Candidate vs expert, paired by task_id. Each task is judged twice with
// slots swapped; Final Scores map to candidate points 1 / 0.5 / 0 and the
// two orderings are averaged before averaging over tasks.
WinRateReport win_rate(const std::vector<Episode>& candidate,
                       const std::vector<Episode>& expert, Gateway& gateway,
                       const PromptRegistry& prompts);

struct LambdaRow {
    double lambda = 0.0;
    int pair_count = 0;
    std::optional<double> metric;
    std::optional<double> gain_per_sample;  // (metric - baseline) / pair_count
};

struct SweepReport {
    std::vector<LambdaRow> rows;
    std::optional<double> baseline;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// For each lambda, selects + rewrites the sub-threshold tuples and reports
// pair counts; with a downstream closure, trains/evaluates per lambda and
// reports the per-sample gain against closure({}).
using MetricClosure = std::function<double(const std::vector<PreferencePair>&)>;
SweepReport lambda_sweep(const std::vector<ECTuple>& tuples,
                         const std::vector<double>& lambdas, Gateway& gateway,
                         const PromptRegistry& prompts, const BuildConfig& base_config,
                         const MetricClosure& downstream = nullptr);

struct SampleRow {
    std::string label;  // "50", "100", ..., "All"
    int used = 0;
    std::optional<double> metric;
};

struct SampleSweepReport {
    std::vector<SampleRow> rows;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// Uniform subsampling via a fixed seed; size 0 means the whole set ("All").
SampleSweepReport sample_sweep(const std::vector<PreferencePair>& pairs,
                               const std::vector<int>& sizes, std::uint64_t seed,
                               const MetricClosure& downstream = nullptr);

}  // namespace ecpo

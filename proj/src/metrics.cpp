#include "ecpo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace ecpo {

using nlohmann::json;

double success_rate(const std::vector<Episode>& episodes) {
    if (episodes.empty()) throw EcpoError("success rate undefined over zero episodes");
    int successes = 0;
    for (const auto& e : episodes)
        if (classify_outcome(e.turns, e.target, e.outcome == Outcome::Truncated) ==
            Outcome::Success)
            ++successes;
    return static_cast<double>(successes) / static_cast<double>(episodes.size());
}

double success_rate_fuzzy(const std::vector<Episode>& episodes, Embedder& embedder,
                          double threshold) {
    if (episodes.empty()) throw EcpoError("success rate undefined over zero episodes");
    int successes = 0;
    for (const auto& e : episodes) {
        bool hit = false;
        for (const auto& turn : e.turns) {
            if (turn.action.kind != ActionKind::Recommend) continue;
            if (recommend_matches(turn.action.payload, e.target.title)) {
                hit = true;
                break;
            }
            auto vectors = embedder.embed({turn.action.payload, e.target.title});
            auto normalize = [](std::vector<double>& v) {
                double norm = 0.0;
                for (double x : v) norm += x * x;
                norm = std::sqrt(norm);
                if (norm > 0.0)
                    for (double& x : v) x /= norm;
            };
            normalize(vectors[0]);
            normalize(vectors[1]);
            if (cosine(vectors[0], vectors[1]) >= threshold) {
                hit = true;
                break;
            }
        }
        if (hit) ++successes;
    }
    return static_cast<double>(successes) / static_cast<double>(episodes.size());
}

double recall_rate(const std::vector<Episode>& episodes) {
    if (episodes.empty()) throw EcpoError("recall rate undefined over zero episodes");
    int hits = 0;
    for (const auto& e : episodes) {
        bool hit = false;
        for (const auto& turn : e.turns) {
            if (!turn.retrieval) continue;
            for (const auto& item : *turn.retrieval)
                if (item.item_id == e.target.item_id) {
                    hit = true;
                    break;
                }
            if (hit) break;
        }
        if (hit) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(episodes.size());
}

std::string transcript(const Episode& episode) {
    std::ostringstream ss;
    ss << "User: " << episode.opening_utterance << "\n";
    for (const auto& turn : episode.turns) {
        ss << "Assistant: " << turn.action.payload << "\n";
        ss << "User: " << turn.user_utterance << "\n";
    }
    return ss.str();
}

namespace {

bool valid_score(const json& v) {
    if (!v.is_number_integer()) return false;
    int s = v.get<int>();
    return s == -1 || s == 0 || s == 1;
}

bool valid_verdict(const json& j) {
    for (const char* dim : {"Flexibility", "Coherence", "User Guidance"}) {
        if (!j.contains(dim) || !j.at(dim).is_object()) return false;
        if (!j.at(dim).contains("Score") || !valid_score(j.at(dim).at("Score"))) return false;
    }
    return j.contains("Final Score") && valid_score(j.at("Final Score"));
}

}  // namespace

JudgeVerdict judge_pair(const Episode& traj_a, const Episode& traj_b, Gateway& gateway,
                        const PromptRegistry& prompts) {
    CompletionRequest request;
    request.system_prompt = fill_prompt(
        prompts.get("judge").text,
        {{"traj_a", transcript(traj_a)}, {"traj_b", transcript(traj_b)}});
    request.messages = {{"user", "Output the JSON object only."}};
    request.response_schema = "judge_verdict";

    JudgeVerdict verdict;
    try {
        auto structured = gateway.complete_structured(Role::Judge, request, valid_verdict);
        const json& j = structured.value;
        verdict.flexibility = j.at("Flexibility").at("Score").get<int>();
        verdict.coherence = j.at("Coherence").at("Score").get<int>();
        verdict.guidance = j.at("User Guidance").at("Score").get<int>();
        verdict.final_score = j.at("Final Score").get<int>();
        verdict.flexibility_reason = j.at("Flexibility").value("Reason", std::string());
        verdict.coherence_reason = j.at("Coherence").value("Reason", std::string());
        verdict.guidance_reason = j.at("User Guidance").value("Reason", std::string());
        verdict.valid = true;
        verdict.attempts = structured.attempts;
    } catch (const StructuredOutputError&) {
        verdict.valid = false;  // excluded with count by the aggregator
    }
    return verdict;
}

namespace {

// Candidate points from a final score: slot_a_is_candidate maps 1 -> win.
double candidate_points(int score, bool slot_a_is_candidate) {
    int oriented = slot_a_is_candidate ? score : -score;
    if (oriented > 0) return 1.0;
    if (oriented < 0) return 0.0;
    return 0.5;
}

}  // namespace

WinRateReport win_rate(const std::vector<Episode>& candidate,
                       const std::vector<Episode>& expert, Gateway& gateway,
                       const PromptRegistry& prompts) {
    std::map<std::string, const Episode*> expert_by_task;
    for (const auto& e : expert) expert_by_task[e.task_id] = &e;

    WinRateReport report;
    double sum_final = 0.0, sum_flex = 0.0, sum_coh = 0.0, sum_guide = 0.0;

    for (const auto& cand : candidate) {
        auto it = expert_by_task.find(cand.task_id);
        if (it == expert_by_task.end()) {
            ++report.unpaired;
            continue;
        }
        ++report.tasks_paired;
        const Episode& exp = *it->second;

        JudgeVerdict forward = judge_pair(cand, exp, gateway, prompts);   // A = candidate
        JudgeVerdict backward = judge_pair(exp, cand, gateway, prompts);  // B = candidate

        double task_final = 0.0, task_flex = 0.0, task_coh = 0.0, task_guide = 0.0;
        int valid = 0;
        if (forward.valid) {
            task_final += candidate_points(forward.final_score, true);
            task_flex += candidate_points(forward.flexibility, true);
            task_coh += candidate_points(forward.coherence, true);
            task_guide += candidate_points(forward.guidance, true);
            ++valid;
        } else {
            ++report.invalid_verdicts;
        }
        if (backward.valid) {
            task_final += candidate_points(backward.final_score, false);
            task_flex += candidate_points(backward.flexibility, false);
            task_coh += candidate_points(backward.coherence, false);
            task_guide += candidate_points(backward.guidance, false);
            ++valid;
        } else {
            ++report.invalid_verdicts;
        }
        if (valid == 0) continue;  // no valid ordering, task excluded

        task_final /= valid;
        task_flex /= valid;
        task_coh /= valid;
        task_guide /= valid;
        sum_final += task_final;
        sum_flex += task_flex;
        sum_coh += task_coh;
        sum_guide += task_guide;
        ++report.tasks_scored;
        report.per_task.push_back({{"task_id", cand.task_id},
                                   {"points", task_final},
                                   {"forward_valid", forward.valid},
                                   {"backward_valid", backward.valid},
                                   {"forward_final", forward.final_score},
                                   {"backward_final", backward.final_score}});
    }
    if (report.tasks_scored > 0) {
        report.win_rate = sum_final / report.tasks_scored;
        report.flexibility_wr = sum_flex / report.tasks_scored;
        report.coherence_wr = sum_coh / report.tasks_scored;
        report.guidance_wr = sum_guide / report.tasks_scored;
    }
    return report;
}

json WinRateReport::to_json() const {
    return {{"win_rate", win_rate},
            {"flexibility_wr", flexibility_wr},
            {"coherence_wr", coherence_wr},
            {"guidance_wr", guidance_wr},
            {"tasks_paired", tasks_paired},
            {"tasks_scored", tasks_scored},
            {"invalid_verdicts", invalid_verdicts},
            {"unpaired", unpaired},
            {"per_task", per_task}};
}

SweepReport lambda_sweep(const std::vector<ECTuple>& tuples,
                         const std::vector<double>& lambdas, Gateway& gateway,
                         const PromptRegistry& prompts, const BuildConfig& base_config,
                         const MetricClosure& downstream) {
    SweepReport report;
    if (downstream) report.baseline = downstream({});
    for (double lambda : lambdas) {
        BuildConfig config = base_config;
        config.lambda_threshold = lambda;
        auto built = derive_rewrites(tuples, gateway, prompts, config);
        LambdaRow row;
        row.lambda = lambda;
        row.pair_count = static_cast<int>(built.pairs.size());
        if (downstream && row.pair_count > 0) {
            row.metric = downstream(built.pairs);
            row.gain_per_sample = (*row.metric - *report.baseline) / row.pair_count;
        }
        report.rows.push_back(row);
    }
    return report;
}

json SweepReport::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
        json r = {{"lambda", row.lambda}, {"pair_count", row.pair_count}};
        if (row.metric) r["metric"] = *row.metric;
        if (row.gain_per_sample) r["gain_per_sample"] = *row.gain_per_sample;
        rows_json.push_back(r);
    }
    json j = {{"rows", rows_json}};
    if (baseline) j["baseline"] = *baseline;
    return j;
}

std::string SweepReport::to_csv() const {
    std::ostringstream ss;
    ss << "lambda,pair_count,metric,gain_per_sample\n";
    for (const auto& row : rows) {
        ss << row.lambda << "," << row.pair_count << ",";
        if (row.metric) ss << *row.metric;
        ss << ",";
        if (row.gain_per_sample) ss << *row.gain_per_sample;
        ss << "\n";
    }
    return ss.str();
}

SampleSweepReport sample_sweep(const std::vector<PreferencePair>& pairs,
                               const std::vector<int>& sizes, std::uint64_t seed,
                               const MetricClosure& downstream) {
    SampleSweepReport report;
    for (int size : sizes) {
        SampleRow row;
        std::vector<PreferencePair> subset;
        if (size <= 0 || size >= static_cast<int>(pairs.size())) {
            row.label = size <= 0 ? "All" : std::to_string(size);
            subset = pairs;
        } else {
            row.label = std::to_string(size);
            std::vector<std::size_t> indices(pairs.size());
            for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
            Rng rng(derive_seed(seed, row.label));
            std::shuffle(indices.begin(), indices.end(), rng);
            indices.resize(static_cast<std::size_t>(size));
            std::sort(indices.begin(), indices.end());
            for (auto i : indices) subset.push_back(pairs[i]);
        }
        row.used = static_cast<int>(subset.size());
        if (downstream) row.metric = downstream(subset);
        report.rows.push_back(std::move(row));
    }
    return report;
}

json SampleSweepReport::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
        json r = {{"size", row.label}, {"used", row.used}};
        if (row.metric) r["metric"] = *row.metric;
        rows_json.push_back(r);
    }
    return {{"rows", rows_json}};
}

std::string SampleSweepReport::to_csv() const {
    std::ostringstream ss;
    ss << "size,used,metric\n";
    for (const auto& row : rows) {
        ss << row.label << "," << row.used << ",";
        if (row.metric) ss << *row.metric;
        ss << "\n";
    }
    return ss.str();
}

}  // namespace ecpo

#include "ecpo/builder.hpp"

#include <algorithm>
#include <sstream>

#include "ecpo/serialization.hpp"

namespace ecpo {

using nlohmann::json;

std::string render_target_text(const std::string& strategy, const std::string& reasoning,
                               const Action& action) {
    return json{{"strategy", strategy}, {"reasoning", reasoning}, {"action", action.render()}}
        .dump();
}

ParsedTarget parse_target_text(const std::string& text) {
    json j = extract_json_object(text);
    if (!j.contains("strategy") || !j.contains("reasoning") || !j.contains("action"))
        throw ParseError("target text missing strategy/reasoning/action");
    return {j.at("strategy").get<std::string>(), j.at("reasoning").get<std::string>(),
            parse_action(j.at("action").get<std::string>())};
}

json SftBuildResult::counters() const {
    return {{"examples", examples.size()},
            {"episodes_total", episodes_total},
            {"episodes_used", episodes_used}};
}

SftBuildResult build_sft(const std::vector<Episode>& episodes) {
    SftBuildResult result;
    result.episodes_total = static_cast<int>(episodes.size());
    for (const auto& episode : episodes) {
        if (episode.outcome != Outcome::Success) continue;
        ++result.episodes_used;
        for (const auto& turn : episode.turns) {
            SftExample example;
            example.state = response_context(episode, turn.index);
            example.target_text =
                render_target_text(turn.strategy, turn.reasoning, turn.action);
            result.examples.push_back(std::move(example));
        }
    }
    return result;
}

CollectResult collect_ec(const std::vector<Episode>& episodes, Simulator* simulator) {
    CollectResult result;
    for (const auto& episode : episodes) {
        for (const auto& turn : episode.turns) {
            ECTuple tuple;
            tuple.source_episode = episode.task_id;
            tuple.source_turn = turn.index;
            try {
                tuple.state = response_context(episode, turn.index);
            } catch (const std::exception& e) {
                ++result.skipped;
                result.log.push_back("skipped " + episode.task_id + " turn " +
                                     std::to_string(turn.index) + ": " + e.what());
                continue;
            }
            tuple.strategy = turn.strategy;
            tuple.reasoning = turn.reasoning;
            tuple.action = turn.action;
            if (turn.ec) {
                tuple.ec = *turn.ec;
                ++result.reused_records;
            } else if (simulator) {
                try {
                    tuple.ec = simulator->confirm_expectation(
                        episode.target, reconstruct_state(episode, turn.index).render_history(),
                        turn.action.render());
                    ++result.confirmed_records;
                } catch (const EcpoError& e) {
                    ++result.skipped;
                    result.log.push_back("confirmation failed for " + episode.task_id +
                                         " turn " + std::to_string(turn.index) + ": " +
                                         e.what());
                    continue;
                }
            } else {
                ++result.skipped;
                result.log.push_back("no EC record and no simulator for " + episode.task_id +
                                     " turn " + std::to_string(turn.index));
                continue;
            }
            result.tuples.push_back(std::move(tuple));
        }
    }
    return result;
}

json RewriteResult::counters() const {
    return {{"pairs", pairs.size()},
            {"selected", selected},
            {"dropped_identical", dropped_identical},
            {"dropped_unparseable", dropped_unparseable},
            {"flagged_edit_ratio", flagged_edit_ratio}};
}

RewriteResult derive_rewrites(const std::vector<ECTuple>& tuples, Gateway& gateway,
                              const PromptRegistry& prompts, const BuildConfig& config) {
    if (config.lambda_threshold < 0.0 || config.lambda_threshold > 5.0)
        throw ConfigError("lambda threshold must be within [0, 5]");
    RewriteResult result;
    for (const auto& tuple : tuples) {
        if (!config.selects(tuple.ec.score)) continue;
        ++result.selected;

        CompletionRequest request;
        request.system_prompt =
            fill_prompt(prompts.get("rewrite").text,
                        {{"scratchpad", tuple.state.render()},
                         {"original_response", tuple.action.render()},
                         {"feedback_flaws", tuple.ec.explanation}});
        request.messages = {{"user", "Output the JSON object only."}};
        request.response_schema = "rewrite";

        StructuredResult structured;
        Action refined;
        try {
            structured = gateway.complete_structured(
                Role::Rewriter, request, [](const json& j) {
                    if (!j.at("reason").is_string() || !j.at("refinement").is_string())
                        return false;
                    try {
                        parse_action(j.at("refinement").get<std::string>());
                        return true;
                    } catch (const ParseError&) {
                        return false;
                    }
                });
            refined = parse_action(structured.value.at("refinement").get<std::string>());
        } catch (const EcpoError&) {
            ++result.dropped_unparseable;
            continue;
        }

        if (refined == tuple.action) {
            ++result.dropped_identical;
            continue;
        }

        PreferencePair pair;
        pair.state = tuple.state;
        pair.rewrite_rationale = structured.value.at("reason").get<std::string>();
        // The rewriter may revise the reasoning; by default the original
        // reasoning is preserved in the preferred target.
        std::string preferred_reasoning = tuple.reasoning;
        if (structured.value.contains("revised_reasoning") &&
            structured.value.at("revised_reasoning").is_string())
            preferred_reasoning = structured.value.at("revised_reasoning").get<std::string>();
        if (config.include_reasoning_in_pairs) {
            pair.dispreferred =
                render_target_text(tuple.strategy, tuple.reasoning, tuple.action);
            pair.preferred =
                render_target_text(tuple.strategy, preferred_reasoning, refined);
        } else {
            pair.dispreferred = tuple.action.render();
            pair.preferred = refined.render();
        }
        if (pair.preferred == pair.dispreferred) {
            ++result.dropped_identical;
            continue;
        }
        pair.ec = tuple.ec;
        pair.source_episode = tuple.source_episode;
        pair.source_turn = tuple.source_turn;

        auto original_tokens = tokenize(tuple.action.payload);
        auto refined_tokens = tokenize(refined.payload);
        double distance =
            static_cast<double>(token_edit_distance(original_tokens, refined_tokens));
        double ratio = distance / std::max<std::size_t>(original_tokens.size(), 1);
        if (ratio > config.edit_ratio_limit) {
            pair.edit_ratio_exceeded = true;  // flagged, not dropped
            ++result.flagged_edit_ratio;
        }
        result.pairs.push_back(std::move(pair));
    }
    std::stable_sort(result.pairs.begin(), result.pairs.end(),
                     [](const PreferencePair& a, const PreferencePair& b) {
                         if (a.source_episode != b.source_episode)
                             return a.source_episode < b.source_episode;
                         return a.source_turn < b.source_turn;
                     });
    return result;
}

ExportFormat export_format_from_string(std::string_view s) {
    std::string k = to_lower(trim(s));
    if (k == "sft") return ExportFormat::Sft;
    if (k == "dpo") return ExportFormat::Dpo;
    if (k == "kto") return ExportFormat::Kto;
    throw ConfigError("unknown export format: " + std::string(s));
}

void export_training_files(const std::vector<SftExample>& sft,
                           const std::vector<PreferencePair>& pairs, ExportFormat format,
                           const std::filesystem::path& path) {
    std::ostringstream out;
    switch (format) {
        case ExportFormat::Sft:
            if (sft.empty()) throw EcpoError("no SFT examples to export");
            for (const auto& example : sft)
                out << json{{"prompt", example.state.render()},
                            {"completion", example.target_text}}
                           .dump()
                    << "\n";
            break;
        case ExportFormat::Dpo:
            if (pairs.empty()) throw EcpoError("no preference pairs to export");
            for (const auto& pair : pairs)
                out << json{{"prompt", pair.state.render()},
                            {"chosen", pair.preferred},
                            {"rejected", pair.dispreferred},
                            {"source_episode", pair.source_episode},
                            {"source_turn", pair.source_turn},
                            {"ec_score", pair.ec.score}}
                           .dump()
                    << "\n";
            break;
        case ExportFormat::Kto:
            if (pairs.empty()) throw EcpoError("no preference pairs to export");
            for (const auto& pair : pairs) {
                out << json{{"prompt", pair.state.render()},
                            {"completion", pair.preferred},
                            {"label", true}}
                           .dump()
                    << "\n";
                out << json{{"prompt", pair.state.render()},
                            {"completion", pair.dispreferred},
                            {"label", false}}
                           .dump()
                    << "\n";
            }
            break;
    }
    write_file(path, out.str());

    // Sidecar with suggested external fine-tuning settings; full-scale LoRA
    // training happens outside this toolkit.
    json meta = {{"records", format == ExportFormat::Kto ? 2 * pairs.size()
                             : format == ExportFormat::Dpo ? pairs.size()
                                                           : sft.size()},
                 {"suggested_settings",
                  format == ExportFormat::Sft
                      ? json{{"learning_rate", 5e-05}, {"batch_size", 8}}
                      : json{{"learning_rates", {1e-06, 5e-07}}, {"batch_size", 32}}}};
    std::filesystem::path meta_path = path;
    meta_path += ".meta.json";
    write_file(meta_path, meta.dump(2) + "\n");
}

namespace {

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::vector<json> records;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        records.push_back(parse_line(line, line_no));
    }
    return records;
}

}  // namespace

std::vector<DpoRecord> import_dpo_file(const std::filesystem::path& path) {
    std::vector<DpoRecord> out;
    for (const auto& j : read_jsonl(path))
        out.push_back({j.at("prompt").get<std::string>(), j.at("chosen").get<std::string>(),
                       j.at("rejected").get<std::string>()});
    return out;
}

std::vector<KtoRecord> import_kto_file(const std::filesystem::path& path) {
    std::vector<KtoRecord> out;
    for (const auto& j : read_jsonl(path))
        out.push_back({j.at("prompt").get<std::string>(),
                       j.at("completion").get<std::string>(), j.at("label").get<bool>()});
    return out;
}

std::vector<SftRecord> import_sft_file(const std::filesystem::path& path) {
    std::vector<SftRecord> out;
    for (const auto& j : read_jsonl(path))
        out.push_back(
            {j.at("prompt").get<std::string>(), j.at("completion").get<std::string>()});
    return out;
}

}  // namespace ecpo

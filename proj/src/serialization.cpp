#include "ecpo/serialization.hpp"

#include <sstream>

namespace ecpo {

using nlohmann::json;

namespace {

// Field accessor that names the field and line in parse errors.
template <typename T>
T require(const json& j, const char* field, std::size_t line_no) {
    if (!j.contains(field)) {
        std::ostringstream ss;
        ss << "line " << line_no << ": missing field '" << field << "'";
        throw ParseError(ss.str());
    }
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        std::ostringstream ss;
        ss << "line " << line_no << ": bad field '" << field << "': " << e.what();
        throw ParseError(ss.str());
    }
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

}  // namespace

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        std::ostringstream ss;
        ss << "line " << line_no << ": not valid JSON: " << e.what();
        throw ParseError(ss.str());
    }
}

json item_to_json(const ItemRef& item) {
    return {{"item_id", item.item_id},
            {"title", item.title},
            {"description", item.description},
            {"domain", item.domain}};
}

ItemRef item_from_json(const json& j) {
    ItemRef item;
    item.item_id = j.at("item_id").get<std::string>();
    item.title = j.at("title").get<std::string>();
    item.description = j.value("description", std::string());
    item.domain = j.value("domain", std::string());
    return item;
}

json ec_to_json(const ECRecord& ec) {
    return {{"explanation", ec.explanation},
            {"flexibility_deduction", ec.flexibility_deduction},
            {"coherence_deduction", ec.coherence_deduction},
            {"guidance_deduction", ec.guidance_deduction},
            {"score", ec.score},
            {"discrepancy", ec.discrepancy}};
}

ECRecord ec_from_json(const json& j) {
    ECRecord ec = make_ec_record(
        j.at("explanation").get<std::string>(), j.at("flexibility_deduction").get<int>(),
        j.at("coherence_deduction").get<int>(), j.at("guidance_deduction").get<int>(),
        j.at("score").get<int>());
    // A serialized record that disagrees with its own deductions keeps the
    // recomputed score; the discrepancy flag is whatever was stored.
    ec.discrepancy = j.value("discrepancy", ec.discrepancy);
    return ec;
}

json state_to_json(const DialogueState& state) {
    json h = json::array();
    for (const auto& u : state.history) h.push_back({{"speaker", u.speaker}, {"text", u.text}});
    json j = {{"history", h}, {"turn_index", state.turn_index}};
    if (state.last_retrieval) {
        json r = json::array();
        for (const auto& item : *state.last_retrieval) r.push_back(item_to_json(item));
        j["last_retrieval"] = r;
    }
    return j;
}

DialogueState state_from_json(const json& j) {
    DialogueState state;
    for (const auto& u : j.at("history"))
        state.history.push_back(
            {u.at("speaker").get<std::string>(), u.at("text").get<std::string>()});
    state.turn_index = j.at("turn_index").get<int>();
    if (j.contains("last_retrieval")) {
        std::vector<ItemRef> items;
        for (const auto& it : j.at("last_retrieval")) items.push_back(item_from_json(it));
        state.last_retrieval = std::move(items);
    }
    return state;
}

namespace {

json episode_header(const Episode& e) {
    json j = {{"type", "episode"},
              {"schema_version", kSchemaVersion},
              {"task_id", e.task_id},
              {"persona_id", e.persona_id},
              {"target_item", item_to_json(e.target)},
              {"opening_utterance", e.opening_utterance},
              {"opener_source", e.opener_source},
              {"outcome", to_string(e.outcome)},
              {"max_turns", e.max_turns}};
    if (!e.error.empty()) j["error"] = e.error;
    return j;
}

json turn_record(const Turn& t) {
    json j = {{"type", "turn"},
              {"index", t.index},
              {"strategy", t.strategy},
              {"reasoning", t.reasoning},
              {"action", {{"kind", to_string(t.action.kind)}, {"payload", t.action.payload}}},
              {"user_policy", t.user_policy},
              {"user_utterance", t.user_utterance}};
    if (t.retrieval) {
        json r = json::array();
        for (const auto& item : *t.retrieval) r.push_back(item_to_json(item));
        j["retrieval"] = r;
    }
    if (t.ec) j["ec"] = ec_to_json(*t.ec);
    return j;
}

Turn turn_from_record(const json& j, std::size_t line_no) {
    Turn t;
    t.index = require<int>(j, "index", line_no);
    t.strategy = j.value("strategy", std::string());
    t.reasoning = j.value("reasoning", std::string());
    if (!j.contains("action")) throw ParseError("line " + std::to_string(line_no) +
                                                ": missing field 'action'");
    const json& a = j.at("action");
    t.action.kind = action_kind_from_string(require<std::string>(a, "kind", line_no));
    t.action.payload = require<std::string>(a, "payload", line_no);
    t.user_policy = j.value("user_policy", std::string());
    t.user_utterance = require<std::string>(j, "user_utterance", line_no);
    if (j.contains("retrieval")) {
        std::vector<ItemRef> items;
        for (const auto& it : j.at("retrieval")) items.push_back(item_from_json(it));
        t.retrieval = std::move(items);
    }
    if (j.contains("ec")) t.ec = ec_from_json(j.at("ec"));
    return t;
}

void append_episode(std::ostringstream& out, const Episode& e) {
    out << episode_header(e).dump() << "\n";
    for (const auto& t : e.turns) out << turn_record(t).dump() << "\n";
}

struct CorpusReader {
    std::vector<Episode> episodes;
    Episode current;
    bool open = false;
    int expected_index = 1;

    void start(Episode e) {
        finish();
        current = std::move(e);
        open = true;
        expected_index = 1;
    }

    void add_turn(Turn t, std::size_t line_no) {
        if (!open)
            throw ParseError("line " + std::to_string(line_no) +
                             ": turn record before episode header");
        if (t.index != expected_index)
            throw ParseError("line " + std::to_string(line_no) + ": field 'index': expected " +
                             std::to_string(expected_index) + ", got " +
                             std::to_string(t.index));
        ++expected_index;
        current.turns.push_back(std::move(t));
    }

    void finish() {
        if (open) {
            if (static_cast<int>(current.turns.size()) > current.max_turns)
                throw ParseError("episode " + current.task_id + ": more turns than max_turns");
            episodes.push_back(std::move(current));
            current = Episode{};
            open = false;
        }
    }
};

Episode header_from_record(const json& j, std::size_t line_no) {
    Episode e;
    e.task_id = require<std::string>(j, "task_id", line_no);
    e.persona_id = require<std::string>(j, "persona_id", line_no);
    if (!j.contains("target_item"))
        throw ParseError("line " + std::to_string(line_no) + ": missing field 'target_item'");
    e.target = item_from_json(j.at("target_item"));
    e.opening_utterance = require<std::string>(j, "opening_utterance", line_no);
    e.opener_source = j.value("opener_source", std::string("template"));
    e.outcome = outcome_from_string(require<std::string>(j, "outcome", line_no));
    e.max_turns = require<int>(j, "max_turns", line_no);
    e.error = j.value("error", std::string());
    return e;
}

}  // namespace

std::string serialize_episode(const Episode& episode) {
    std::ostringstream out;
    append_episode(out, episode);
    return out.str();
}

std::string serialize_corpus(const std::vector<Episode>& episodes) {
    std::ostringstream out;
    for (const auto& e : episodes) append_episode(out, e);
    return out.str();
}

std::vector<Episode> deserialize_corpus(const std::string& text) {
    CorpusReader reader;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json j = parse_line(lines[i], i + 1);
        std::string type = require<std::string>(j, "type", i + 1);
        if (type == "episode")
            reader.start(header_from_record(j, i + 1));
        else if (type == "turn")
            reader.add_turn(turn_from_record(j, i + 1), i + 1);
        else
            throw ParseError("line " + std::to_string(i + 1) + ": field 'type': unknown value '" +
                             type + "'");
    }
    reader.finish();
    return reader.episodes;
}

Episode deserialize_episode(const std::string& text) {
    auto episodes = deserialize_corpus(text);
    if (episodes.size() != 1)
        throw ParseError("expected exactly one episode, got " +
                         std::to_string(episodes.size()));
    return episodes.front();
}

void write_episodes(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
    write_file(path, serialize_corpus(episodes));
}

std::vector<Episode> read_episodes(const std::filesystem::path& path) {
    return deserialize_corpus(read_file(path));
}

std::string serialize_personas(const std::vector<Persona>& personas) {
    std::ostringstream out;
    for (const auto& p : personas) {
        json j = {{"type", "persona"},
                  {"schema_version", kSchemaVersion},
                  {"id", p.id},
                  {"activities", p.activities},
                  {"interests", p.interests},
                  {"language_style", p.language_style},
                  {"orientations", p.orientations},
                  {"source_reviews", p.source_reviews}};
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<Persona> deserialize_personas(const std::string& text) {
    std::vector<Persona> personas;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json j = parse_line(lines[i], i + 1);
        Persona p;
        p.id = require<std::string>(j, "id", i + 1);
        p.activities = require<std::vector<std::string>>(j, "activities", i + 1);
        p.interests = require<std::vector<std::string>>(j, "interests", i + 1);
        p.language_style = require<std::string>(j, "language_style", i + 1);
        p.orientations = require<std::string>(j, "orientations", i + 1);
        p.source_reviews = j.value("source_reviews", std::vector<std::string>{});
        personas.push_back(std::move(p));
    }
    return personas;
}

void write_personas(const std::filesystem::path& path, const std::vector<Persona>& personas) {
    write_file(path, serialize_personas(personas));
}

std::vector<Persona> read_personas(const std::filesystem::path& path) {
    return deserialize_personas(read_file(path));
}

std::string serialize_tasks(const std::vector<Task>& tasks) {
    std::ostringstream out;
    for (const auto& t : tasks) {
        json j = {{"type", "task"},
                  {"schema_version", kSchemaVersion},
                  {"id", t.id},
                  {"persona_id", t.persona_id},
                  {"target_item", item_to_json(t.target)},
                  {"domain", t.domain}};
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<Task> deserialize_tasks(const std::string& text) {
    std::vector<Task> tasks;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json j = parse_line(lines[i], i + 1);
        Task t;
        t.id = require<std::string>(j, "id", i + 1);
        t.persona_id = require<std::string>(j, "persona_id", i + 1);
        if (!j.contains("target_item"))
            throw ParseError("line " + std::to_string(i + 1) + ": missing field 'target_item'");
        t.target = item_from_json(j.at("target_item"));
        t.domain = j.value("domain", std::string());
        tasks.push_back(std::move(t));
    }
    return tasks;
}

void write_tasks(const std::filesystem::path& path, const std::vector<Task>& tasks) {
    write_file(path, serialize_tasks(tasks));
}

std::vector<Task> read_tasks(const std::filesystem::path& path) {
    return deserialize_tasks(read_file(path));
}

json pair_to_json(const PreferencePair& pair) {
    return {{"type", "preference_pair"},
            {"schema_version", kSchemaVersion},
            {"state", state_to_json(pair.state)},
            {"dispreferred", pair.dispreferred},
            {"preferred", pair.preferred},
            {"ec", ec_to_json(pair.ec)},
            {"rewrite_rationale", pair.rewrite_rationale},
            {"source_episode", pair.source_episode},
            {"source_turn", pair.source_turn},
            {"edit_ratio_exceeded", pair.edit_ratio_exceeded}};
}

PreferencePair pair_from_json(const json& j) {
    PreferencePair pair;
    pair.state = state_from_json(j.at("state"));
    pair.dispreferred = j.at("dispreferred").get<std::string>();
    pair.preferred = j.at("preferred").get<std::string>();
    pair.ec = ec_from_json(j.at("ec"));
    pair.rewrite_rationale = j.value("rewrite_rationale", std::string());
    pair.source_episode = j.at("source_episode").get<std::string>();
    pair.source_turn = j.at("source_turn").get<int>();
    pair.edit_ratio_exceeded = j.value("edit_ratio_exceeded", false);
    return pair;
}

std::string serialize_pairs(const std::vector<PreferencePair>& pairs) {
    std::ostringstream out;
    for (const auto& p : pairs) out << pair_to_json(p).dump() << "\n";
    return out.str();
}

std::vector<PreferencePair> deserialize_pairs(const std::string& text) {
    std::vector<PreferencePair> pairs;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        json j = parse_line(lines[i], i + 1);
        try {
            pairs.push_back(pair_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return pairs;
}

void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
    write_file(path, serialize_pairs(pairs));
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
    return deserialize_pairs(read_file(path));
}

}  // namespace ecpo

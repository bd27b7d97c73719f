#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/types.hpp"

namespace ecpo {

// Line-delimited records, UTF-8. An episode is one header record followed by
// one record per turn; a corpus file is a concatenation of episodes. Every
// header carries schema_version.
inline constexpr int kSchemaVersion = 1;

nlohmann::json item_to_json(const ItemRef& item);
ItemRef item_from_json(const nlohmann::json& j);

nlohmann::json ec_to_json(const ECRecord& ec);
ECRecord ec_from_json(const nlohmann::json& j);

nlohmann::json state_to_json(const DialogueState& state);
DialogueState state_from_json(const nlohmann::json& j);

std::string serialize_episode(const Episode& episode);
Episode deserialize_episode(const std::string& text);

std::string serialize_corpus(const std::vector<Episode>& episodes);
std::vector<Episode> deserialize_corpus(const std::string& text);

void write_episodes(const std::filesystem::path& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_episodes(const std::filesystem::path& path);

std::string serialize_personas(const std::vector<Persona>& personas);
std::vector<Persona> deserialize_personas(const std::string& text);
void write_personas(const std::filesystem::path& path, const std::vector<Persona>& personas);
std::vector<Persona> read_personas(const std::filesystem::path& path);

std::string serialize_tasks(const std::vector<Task>& tasks);
std::vector<Task> deserialize_tasks(const std::string& text);
void write_tasks(const std::filesystem::path& path, const std::vector<Task>& tasks);
std::vector<Task> read_tasks(const std::filesystem::path& path);

nlohmann::json pair_to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const nlohmann::json& j);
std::string serialize_pairs(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> deserialize_pairs(const std::string& text);
void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

// Parses one JSON line; errors carry the 1-based line number and offending
// field where known.
nlohmann::json parse_line(const std::string& line, std::size_t line_no);

}  // namespace ecpo

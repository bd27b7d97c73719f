#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ecpo/util.hpp"

namespace ecpo {

struct PromptTemplate {
    std::string name;
    std::string version;
    std::string text;

    std::uint64_t hash() const { return fnv1a(text, fnv1a(version)); }
};

// Central registry of every prompt the pipeline issues. Run manifests record
// the template hashes so results are attributable to exact prompt versions.
class PromptRegistry {
  public:
    static const PromptRegistry& instance();

    const PromptTemplate& get(const std::string& name) const;
    std::vector<std::string> names() const;
    std::map<std::string, std::string> hashes() const;

    // Returns a copy of the registry with any <name>.txt files in `dir`
    // overriding the built-in texts.
    static PromptRegistry with_overrides(const std::filesystem::path& dir);

  private:
    PromptRegistry();
    std::map<std::string, PromptTemplate> templates_;
};

// Replaces "{key}" for exactly the provided keys; all other braces (for
// example JSON output formats inside templates) are left alone.
std::string fill_prompt(const std::string& text,
                        const std::map<std::string, std::string>& slots);

// Stable opening phrases, shared by the prompt templates and the mock
// provider's stage detection.
inline constexpr const char* kMarkerAgent = "You are ActCRS";
inline constexpr const char* kMarkerAgentObservation = "Search observation:";
inline constexpr const char* kMarkerSimulator = "You are simulating a user";
inline constexpr const char* kMarkerSimPolicy = "decide only your response policy";
inline constexpr const char* kMarkerSimUtterance = "write only your next utterance";
inline constexpr const char* kMarkerEcConfirm =
    "your task is to evaluate the expressiveness and interaction quality";
inline constexpr const char* kMarkerRewrite = "You are a rewrite model";
inline constexpr const char* kMarkerJudge =
    "You are provided with two dialogue trajectories for comparison";
inline constexpr const char* kMarkerPersona = "You are a consumer-insight analyst";
inline constexpr const char* kMarkerOpener = "compose the opening message";

}  // namespace ecpo

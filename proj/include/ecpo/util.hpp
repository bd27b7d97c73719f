#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ecpo {

// Error families. Batch runners catch EcpoError subclasses per item; anything
// else is a programming bug and propagates.
struct EcpoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : EcpoError {
    using EcpoError::EcpoError;
};
struct SchemaError : EcpoError {
    using EcpoError::EcpoError;
};
struct GatewayError : EcpoError {
    using EcpoError::EcpoError;
};
struct StructuredOutputError : GatewayError {
    std::string raw_text;
    StructuredOutputError(const std::string& msg, std::string raw)
        : GatewayError(msg), raw_text(std::move(raw)) {}
};
struct ConfigError : EcpoError {
    using EcpoError::EcpoError;
};

// FNV-1a, the stable hash used for request fingerprints, config hashes and
// the deterministic mock backend. Not cryptographic; stability across
// platforms is what matters here.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hash_hex(std::uint64_t h);

// Lowercase, strip punctuation, collapse whitespace. The matching rule for
// "the Recommend payload names the target item" compares normalized texts.
std::string normalize_text(std::string_view text);
bool contains_normalized(std::string_view haystack, std::string_view needle);

std::vector<std::string> tokenize(std::string_view text);          // whitespace split
std::vector<std::string> tokenize_lower(std::string_view text);    // lowercased tokens
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Longest common subsequence length over token sequences.
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// ROUGE-L F1 on whitespace-tokenized, lowercased text.
double rouge_l(std::string_view a, std::string_view b);

// Token-level Levenshtein distance; the rewrite-scope guard uses the ratio
// distance / len(original tokens).
std::size_t token_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b);

// Pattern match for scripted-behavior rules: a pattern without '*' matches
// as a substring; with '*' it is an anchored glob ('*' = any run).
bool pattern_match(std::string_view pattern, std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Deterministic per-stage seed derivation from one root seed.
std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view stage);

using Rng = std::mt19937_64;

}  // namespace ecpo

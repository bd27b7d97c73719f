#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/util.hpp"

namespace ecpo {

// Every model invocation in the pipeline is attributed to one of these roles;
// the ledger is how the sampling-cost accounting is audited.
enum class Role { Agent, Simulator, Rewriter, Judge, Embedder };

std::string to_string(Role role);

struct Message {
    std::string role;  // "system" | "user" | "assistant"
    std::string text;

    bool operator==(const Message&) const = default;
};

struct CompletionRequest {
    std::string system_prompt;
    std::vector<Message> messages;
    double temperature = 0.0;
    std::string response_schema;  // empty = free text

    bool operator==(const CompletionRequest&) const = default;
};

// Canonical rendering of a request; the fingerprint is its FNV-1a hash.
// Scripted mock rules match against this string.
std::string request_fingerprint_text(const CompletionRequest& request);
std::uint64_t request_fingerprint(const CompletionRequest& request);

class Provider {
  public:
    virtual ~Provider() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
};

class CallLedger {
  public:
    void record(Role role) { counters_[index(role)].fetch_add(1, std::memory_order_relaxed); }
    void record_repair(Role role) {
        repairs_[index(role)].fetch_add(1, std::memory_order_relaxed);
    }
    std::uint64_t count(Role role) const {
        return counters_[index(role)].load(std::memory_order_relaxed);
    }
    std::uint64_t total() const;
    std::uint64_t repair_attempts(Role role) const {
        return repairs_[index(role)].load(std::memory_order_relaxed);
    }
    void reset();

    std::map<std::string, std::uint64_t> snapshot() const;
    nlohmann::json to_json() const;

  private:
    static constexpr std::size_t kRoles = 5;
    static std::size_t index(Role role) { return static_cast<std::size_t>(role); }
    std::atomic<std::uint64_t> counters_[kRoles]{};
    std::atomic<std::uint64_t> repairs_[kRoles]{};
};

struct StructuredResult {
    nlohmann::json value;
    int attempts = 1;  // 1 = first reply parsed
};

// Appended to the conversation when a reply fails schema validation; scripted
// behaviors can key rules off this marker to exercise the repair path.
extern const char* const kRepairInstruction;

// Known response schemas: tag -> required top-level keys.
const std::vector<std::string>& schema_required_keys(const std::string& schema);
bool validate_schema(const nlohmann::json& j, const std::string& schema);

// Extracts the first balanced JSON object embedded in model text.
nlohmann::json extract_json_object(const std::string& text);

class Gateway {
  public:
    explicit Gateway(std::shared_ptr<Provider> provider, int repair_retries = 2)
        : provider_(std::move(provider)), repair_retries_(repair_retries) {}

    std::string complete(Role role, const CompletionRequest& request);

    // Parses and validates structured output, retrying with a repair
    // instruction appended. A valid first reply is returned untouched. The
    // optional validator checks field values beyond required-key presence.
    StructuredResult complete_structured(
        Role role, const CompletionRequest& request,
        const std::function<bool(const nlohmann::json&)>& validator = nullptr);

    CallLedger& ledger() { return ledger_; }
    const CallLedger& ledger() const { return ledger_; }
    Provider& provider() { return *provider_; }
    int repair_retries() const { return repair_retries_; }

  private:
    std::shared_ptr<Provider> provider_;
    CallLedger ledger_;
    int repair_retries_;
};

}  // namespace ecpo

#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "ecpo/builder.hpp"
#include "ecpo/policy.hpp"

namespace ecpo {

// Pre-tokenized training rows. Target sequences carry the terminal <eos>
// token, so the modeled length is |tokens| + 1.
struct TokenizedExample {
    std::vector<int> context;
    std::vector<int> target;
};

struct TokenizedPair {
    std::vector<int> context;
    std::vector<int> chosen;
    std::vector<int> rejected;
};

TokenizedExample tokenize_example(const SftRecord& record, const Vocab& vocab);
TokenizedPair tokenize_pair(const DpoRecord& record, const Vocab& vocab);

// Mean negative log-likelihood of the targets.
double sft_loss(const TokenizedPolicy& policy, const std::vector<TokenizedExample>& batch);
std::vector<double> sft_grad(const TokenizedPolicy& policy,
                             const std::vector<TokenizedExample>& batch);

// Mean of -log sigmoid(beta * margin); the reference is frozen, so the
// returned gradient covers the policy parameters only.
double dpo_loss(const TokenizedPolicy& policy, const TokenizedPolicy& reference,
                const std::vector<TokenizedPair>& batch, double beta);
std::vector<double> dpo_grad(const TokenizedPolicy& policy, const TokenizedPolicy& reference,
                             const std::vector<TokenizedPair>& batch, double beta);

// Mean (chosen - rejected) log-prob margin relative to the reference.
double mean_margin(const TokenizedPolicy& policy, const TokenizedPolicy& reference,
                   const std::vector<TokenizedPair>& batch);

enum class Objective { Sft, Dpo };
Objective objective_from_string(std::string_view s);

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 50;
    int batch_size = 0;  // 0 = full batch
    double beta = 1.0;   // DPO only
    std::uint64_t seed = 7;
};

struct TrainResult {
    std::vector<double> losses;  // per-epoch mean loss
    nlohmann::json to_json() const;
};

// Seed-deterministic gradient descent. For DPO the reference is a frozen
// copy of the incoming policy; NaN loss aborts with diagnostics.
TrainResult train_sft(TokenizedPolicy& policy, const std::vector<TokenizedExample>& dataset,
                      const TrainConfig& config);
TrainResult train_dpo(TokenizedPolicy& policy, const std::vector<TokenizedPair>& dataset,
                      const TrainConfig& config);

}  // namespace ecpo

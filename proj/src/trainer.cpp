#include "ecpo/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace ecpo {

namespace {

std::vector<int> encode_with_eos(const std::string& text, const Vocab& vocab) {
    auto ids = vocab.encode(text);
    ids.push_back(Vocab::kEos);
    return ids;
}

double softplus(double x) {
    // log(1 + e^x), stable for large |x|
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TokenizedExample tokenize_example(const SftRecord& record, const Vocab& vocab) {
    return {vocab.encode(record.prompt), encode_with_eos(record.completion, vocab)};
}

TokenizedPair tokenize_pair(const DpoRecord& record, const Vocab& vocab) {
    return {vocab.encode(record.prompt), encode_with_eos(record.chosen, vocab),
            encode_with_eos(record.rejected, vocab)};
}

double sft_loss(const TokenizedPolicy& policy, const std::vector<TokenizedExample>& batch) {
    if (batch.empty()) throw EcpoError("sft_loss over empty batch");
    double total = 0.0;
    for (const auto& ex : batch) total += -policy.log_prob(ex.context, ex.target);
    return total / static_cast<double>(batch.size());
}

std::vector<double> sft_grad(const TokenizedPolicy& policy,
                             const std::vector<TokenizedExample>& batch) {
    if (batch.empty()) throw EcpoError("sft_grad over empty batch");
    std::vector<double> grad(policy.parameter_count(), 0.0);
    double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch)
        policy.accumulate_log_prob_grad(ex.context, ex.target, -inv, grad);
    return grad;
}

double dpo_loss(const TokenizedPolicy& policy, const TokenizedPolicy& reference,
                const std::vector<TokenizedPair>& batch, double beta) {
    if (batch.empty()) throw EcpoError("dpo_loss over empty batch");
    if (beta <= 0.0) throw ConfigError("beta must be positive");
    double total = 0.0;
    for (const auto& pair : batch) {
        double margin = (policy.log_prob(pair.context, pair.chosen) -
                         reference.log_prob(pair.context, pair.chosen)) -
                        (policy.log_prob(pair.context, pair.rejected) -
                         reference.log_prob(pair.context, pair.rejected));
        total += softplus(-beta * margin);  // == -log sigmoid(beta * margin)
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> dpo_grad(const TokenizedPolicy& policy, const TokenizedPolicy& reference,
                             const std::vector<TokenizedPair>& batch, double beta) {
    if (batch.empty()) throw EcpoError("dpo_grad over empty batch");
    if (beta <= 0.0) throw ConfigError("beta must be positive");
    std::vector<double> grad(policy.parameter_count(), 0.0);
    double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto& pair : batch) {
        double margin = (policy.log_prob(pair.context, pair.chosen) -
                         reference.log_prob(pair.context, pair.chosen)) -
                        (policy.log_prob(pair.context, pair.rejected) -
                         reference.log_prob(pair.context, pair.rejected));
        // d/dtheta softplus(-beta*m) = -sigmoid(-beta*m) * beta * dm/dtheta
        double coeff = -sigmoid(-beta * margin) * beta * inv;
        policy.accumulate_log_prob_grad(pair.context, pair.chosen, coeff, grad);
        policy.accumulate_log_prob_grad(pair.context, pair.rejected, -coeff, grad);
    }
    return grad;
}

double mean_margin(const TokenizedPolicy& policy, const TokenizedPolicy& reference,
                   const std::vector<TokenizedPair>& batch) {
    if (batch.empty()) throw EcpoError("mean_margin over empty batch");
    double total = 0.0;
    for (const auto& pair : batch) {
        total += (policy.log_prob(pair.context, pair.chosen) -
                  reference.log_prob(pair.context, pair.chosen)) -
                 (policy.log_prob(pair.context, pair.rejected) -
                  reference.log_prob(pair.context, pair.rejected));
    }
    return total / static_cast<double>(batch.size());
}

Objective objective_from_string(std::string_view s) {
    std::string k = to_lower(trim(s));
    if (k == "sft") return Objective::Sft;
    if (k == "dpo") return Objective::Dpo;
    throw ConfigError("unknown objective: " + std::string(s));
}

nlohmann::json TrainResult::to_json() const {
    return {{"epochs", losses.size()}, {"losses", losses}};
}

namespace {

template <typename Row, typename LossFn, typename GradFn>
TrainResult run_descent(TokenizedPolicy& policy, const std::vector<Row>& dataset,
                        const TrainConfig& config, LossFn loss_fn, GradFn grad_fn) {
    if (dataset.empty()) throw EcpoError("training dataset is empty");
    TrainResult result;
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(config.seed);
    std::size_t batch_size = config.batch_size > 0
                                 ? static_cast<std::size_t>(config.batch_size)
                                 : dataset.size();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            std::vector<Row> batch;
            for (std::size_t i = begin; i < std::min(begin + batch_size, order.size()); ++i)
                batch.push_back(dataset[order[i]]);
            double loss = loss_fn(policy, batch);
            if (!std::isfinite(loss))
                throw EcpoError("training diverged: non-finite loss at epoch " +
                                std::to_string(epoch) + ", batch " + std::to_string(batches));
            auto grad = grad_fn(policy, batch);
            auto& params = policy.parameters();
            for (std::size_t i = 0; i < params.size(); ++i)
                params[i] -= config.learning_rate * grad[i];
            epoch_loss += loss;
            ++batches;
        }
        result.losses.push_back(epoch_loss / static_cast<double>(batches));
    }
    return result;
}

}  // namespace

TrainResult train_sft(TokenizedPolicy& policy, const std::vector<TokenizedExample>& dataset,
                      const TrainConfig& config) {
    return run_descent(
        policy, dataset, config,
        [](const TokenizedPolicy& p, const std::vector<TokenizedExample>& b) {
            return sft_loss(p, b);
        },
        [](const TokenizedPolicy& p, const std::vector<TokenizedExample>& b) {
            return sft_grad(p, b);
        });
}

TrainResult train_dpo(TokenizedPolicy& policy, const std::vector<TokenizedPair>& dataset,
                      const TrainConfig& config) {
    // The frozen reference is the incoming policy (the SFT checkpoint).
    const TokenizedPolicy reference = policy;
    return run_descent(
        policy, dataset, config,
        [&](const TokenizedPolicy& p, const std::vector<TokenizedPair>& b) {
            return dpo_loss(p, reference, b, config.beta);
        },
        [&](const TokenizedPolicy& p, const std::vector<TokenizedPair>& b) {
            return dpo_grad(p, reference, b, config.beta);
        });
}

}  // namespace ecpo

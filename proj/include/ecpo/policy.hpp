#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ecpo/util.hpp"

namespace ecpo {

// Whitespace vocabulary with <bos>/<eos>. Tokens are case-sensitive so that
// decoded targets reproduce training text exactly. Out-of-vocabulary tokens
// are an error, not an <unk>.
class Vocab {
  public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;

    Vocab();
    explicit Vocab(const std::vector<std::string>& corpus);

    int size() const { return static_cast<int>(tokens_.size()); }
    int id(const std::string& token) const;          // throws on OOV
    const std::string& token(int id) const;
    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;  // skips specials
    const std::vector<std::string>& tokens() const { return tokens_; }

    void add(const std::string& token);

  private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

// Small conditional sequence model: next-token logits are a bigram table
// plus a mean-pooled contribution from the context tokens. Parameters are
// one flat vector, which keeps finite-difference checks trivial.
//
//   score(j | prev=i, ctx) = B[i][j] + mean_{c in ctx} C[c][j]
//
// log_prob sums the per-token conditionals of exactly the given sequence;
// termination is modeled by including <eos> in the sequence.
class TokenizedPolicy {
  public:
    TokenizedPolicy() = default;
    explicit TokenizedPolicy(std::shared_ptr<const Vocab> vocab);

    void init_random(std::uint64_t seed, double scale = 0.1);

    int vocab_size() const { return vocab_ ? vocab_->size() : 0; }
    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    const Vocab& vocab() const { return *vocab_; }
    std::shared_ptr<const Vocab> vocab_ptr() const { return vocab_; }

    double log_prob(const std::vector<int>& context, const std::vector<int>& sequence) const;

    // Adds weight * d log_prob / d theta into grad (same layout as params).
    void accumulate_log_prob_grad(const std::vector<int>& context,
                                  const std::vector<int>& sequence, double weight,
                                  std::vector<double>& grad) const;

    std::vector<int> greedy_decode(const std::vector<int>& context, int max_len = 64) const;

    void save(const std::filesystem::path& path, std::uint64_t config_hash = 0) const;
    static TokenizedPolicy load(const std::filesystem::path& path,
                                std::uint64_t* config_hash = nullptr);

  private:
    // Row-major blocks: B = params_[0 .. V*V), C = params_[V*V .. 2*V*V).
    double bigram(int prev, int next) const;
    double context_bias(int token, int next) const;
    std::vector<double> next_scores(int prev, const std::vector<int>& context) const;

    std::shared_ptr<const Vocab> vocab_;
    std::vector<double> params_;
};

}  // namespace ecpo

#include "ecpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ecpo {

Vocab::Vocab() {
    add("<bos>");
    add("<eos>");
}

Vocab::Vocab(const std::vector<std::string>& corpus) : Vocab() {
    for (const auto& text : corpus)
        for (const auto& token : tokenize(text)) add(token);
}

void Vocab::add(const std::string& token) {
    if (index_.count(token)) return;
    index_[token] = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
}

int Vocab::id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw EcpoError("token outside vocabulary: '" + token + "'");
    return it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) throw EcpoError("token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& token : tokenize(text)) ids.push_back(id(token));
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::vector<std::string> parts;
    for (int i : ids)
        if (i != kBos && i != kEos) parts.push_back(token(i));
    return join(parts, " ");
}

TokenizedPolicy::TokenizedPolicy(std::shared_ptr<const Vocab> vocab)
    : vocab_(std::move(vocab)) {
    std::size_t v = static_cast<std::size_t>(vocab_->size());
    params_.assign(2 * v * v, 0.0);
}

void TokenizedPolicy::init_random(std::uint64_t seed, double scale) {
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& p : params_) p = dist(rng);
}

double TokenizedPolicy::bigram(int prev, int next) const {
    std::size_t v = static_cast<std::size_t>(vocab_->size());
    return params_[static_cast<std::size_t>(prev) * v + static_cast<std::size_t>(next)];
}

double TokenizedPolicy::context_bias(int token, int next) const {
    std::size_t v = static_cast<std::size_t>(vocab_->size());
    return params_[v * v + static_cast<std::size_t>(token) * v + static_cast<std::size_t>(next)];
}

std::vector<double> TokenizedPolicy::next_scores(int prev,
                                                 const std::vector<int>& context) const {
    int v = vocab_->size();
    std::vector<double> scores(static_cast<std::size_t>(v), 0.0);
    for (int j = 0; j < v; ++j) scores[static_cast<std::size_t>(j)] = bigram(prev, j);
    if (!context.empty()) {
        double inv = 1.0 / static_cast<double>(context.size());
        for (int c : context)
            for (int j = 0; j < v; ++j)
                scores[static_cast<std::size_t>(j)] += inv * context_bias(c, j);
    }
    return scores;
}

namespace {

double log_sum_exp(const std::vector<double>& xs) {
    double m = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += std::exp(x - m);
    return m + std::log(sum);
}

}  // namespace

double TokenizedPolicy::log_prob(const std::vector<int>& context,
                                 const std::vector<int>& sequence) const {
    double total = 0.0;
    int prev = Vocab::kBos;
    for (int token : sequence) {
        auto scores = next_scores(prev, context);
        total += scores[static_cast<std::size_t>(token)] - log_sum_exp(scores);
        prev = token;
    }
    return total;
}

void TokenizedPolicy::accumulate_log_prob_grad(const std::vector<int>& context,
                                               const std::vector<int>& sequence, double weight,
                                               std::vector<double>& grad) const {
    if (grad.size() != params_.size()) throw EcpoError("gradient buffer size mismatch");
    std::size_t v = static_cast<std::size_t>(vocab_->size());
    double ctx_inv = context.empty() ? 0.0 : 1.0 / static_cast<double>(context.size());

    int prev = Vocab::kBos;
    for (int token : sequence) {
        auto scores = next_scores(prev, context);
        double lse = log_sum_exp(scores);
        // d log p(token) / d score_j = 1[j == token] - softmax_j
        for (std::size_t j = 0; j < v; ++j) {
            double g = (static_cast<int>(j) == token ? 1.0 : 0.0) -
                       std::exp(scores[j] - lse);
            double wg = weight * g;
            grad[static_cast<std::size_t>(prev) * v + j] += wg;
            if (ctx_inv != 0.0)
                for (int c : context)
                    grad[v * v + static_cast<std::size_t>(c) * v + j] += wg * ctx_inv;
        }
        prev = token;
    }
}

std::vector<int> TokenizedPolicy::greedy_decode(const std::vector<int>& context,
                                                int max_len) const {
    std::vector<int> out;
    int prev = Vocab::kBos;
    for (int step = 0; step < max_len; ++step) {
        auto scores = next_scores(prev, context);
        int best = 0;
        for (int j = 1; j < vocab_->size(); ++j)
            if (scores[static_cast<std::size_t>(j)] > scores[static_cast<std::size_t>(best)])
                best = j;
        if (best == Vocab::kEos) break;
        out.push_back(best);
        prev = best;
    }
    return out;
}

namespace {
constexpr char kPolicyMagic[8] = {'E', 'C', 'P', 'O', 'P', 'O', 'L', '1'};
}

void TokenizedPolicy::save(const std::filesystem::path& path, std::uint64_t config_hash) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw EcpoError("cannot write checkpoint: " + path.string());
    out.write(kPolicyMagic, sizeof(kPolicyMagic));
    out.write(reinterpret_cast<const char*>(&config_hash), sizeof(config_hash));
    std::uint32_t v = static_cast<std::uint32_t>(vocab_->size());
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    for (const auto& token : vocab_->tokens()) {
        std::uint32_t len = static_cast<std::uint32_t>(token.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(token.data(), len);
    }
    std::uint64_t n = params_.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    if (!out) throw EcpoError("short write: " + path.string());
}

TokenizedPolicy TokenizedPolicy::load(const std::filesystem::path& path,
                                      std::uint64_t* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EcpoError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kPolicyMagic, sizeof(magic)) != 0)
        throw ParseError("not a policy checkpoint: " + path.string());
    std::uint64_t hash = 0;
    in.read(reinterpret_cast<char*>(&hash), sizeof(hash));
    if (config_hash) *config_hash = hash;
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    auto vocab = std::make_shared<Vocab>();
    for (std::uint32_t i = 0; i < v; ++i) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string token(len, '\0');
        in.read(token.data(), len);
        if (!in) throw ParseError("truncated checkpoint: " + path.string());
        vocab->add(token);
    }
    TokenizedPolicy policy(vocab);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (n != policy.params_.size()) throw ParseError("checkpoint parameter count mismatch");
    in.read(reinterpret_cast<char*>(policy.params_.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError("truncated checkpoint: " + path.string());
    return policy;
}

}  // namespace ecpo

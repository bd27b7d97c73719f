#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ecpo/catalog.hpp"
#include "ecpo/gateway.hpp"

namespace ecpo {

class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
    virtual int dimension() const = 0;
    virtual std::string name() const = 0;
};

// Deterministic token-bucket embedder for offline runs: tokens hash into
// buckets, counts are L2-normalized. Same seed, same text, same vector.
class HashEmbedder : public Embedder {
  public:
    explicit HashEmbedder(int dim = 64, std::uint64_t seed = 0x5eed);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    int dimension() const override { return dim_; }
    std::string name() const override;

  private:
    int dim_;
    std::uint64_t seed_;
};

struct EmbeddingIndex {
    int dim = 0;
    // Sorted by item_id; every vector is unit-norm (1 +/- 1e-6).
    std::vector<std::pair<std::string, std::vector<double>>> vectors;

    const std::vector<double>* find(const std::string& item_id) const;
};

// Embeds title + description for every catalog item. The ledger, when
// given, attributes the embedding batch to the embedder role.
EmbeddingIndex embed_items(const Catalog& catalog, Embedder& embedder,
                           CallLedger* ledger = nullptr);

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

struct ScoredItem {
    ItemRef item;
    double score = 0.0;
};

// Exact top-k cosine scan. Descending score, ties broken by ascending
// item_id; returns min(k, candidate count) items. `allowed` scopes the scan
// (per-user catalogs); null means the whole index.
std::vector<ScoredItem> retrieve(const EmbeddingIndex& index, const Catalog& catalog,
                                 const std::string& query, int k, Embedder& embedder,
                                 CallLedger* ledger = nullptr,
                                 const std::set<std::string>* allowed = nullptr);

// Immutable bundle the agent runner threads through episodes.
struct Retriever {
    const Catalog* catalog = nullptr;
    const EmbeddingIndex* index = nullptr;
    Embedder* embedder = nullptr;
    CallLedger* ledger = nullptr;
    int k = 5;

    std::vector<ScoredItem> search(const std::string& query,
                                   const std::set<std::string>* allowed = nullptr) const {
        return retrieve(*index, *catalog, query, k, *embedder, ledger, allowed);
    }
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ecpo

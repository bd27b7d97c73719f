#include "ecpo/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ecpo {

HashEmbedder::HashEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) throw ConfigError("embedder dimension must be positive");
}

std::vector<std::vector<double>> HashEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
        for (const auto& token : tokenize_lower(normalize_text(text)))
            v[fnv1a(token, seed_) % static_cast<std::uint64_t>(dim_)] += 1.0;
        out.push_back(std::move(v));
    }
    return out;
}

std::string HashEmbedder::name() const {
    return "hash-" + std::to_string(dim_) + "-" + hash_hex(seed_);
}

namespace {

void normalize_unit(std::vector<double>& v, const std::string& context) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm <= 0.0)
        throw EcpoError("zero embedding vector for " + context);
    for (double& x : v) x /= norm;
}

}  // namespace

const std::vector<double>* EmbeddingIndex::find(const std::string& item_id) const {
    auto it = std::lower_bound(vectors.begin(), vectors.end(), item_id,
                               [](const auto& entry, const std::string& id) {
                                   return entry.first < id;
                               });
    if (it == vectors.end() || it->first != item_id) return nullptr;
    return &it->second;
}

EmbeddingIndex embed_items(const Catalog& catalog, Embedder& embedder, CallLedger* ledger) {
    std::vector<std::string> texts;
    texts.reserve(catalog.items.size());
    for (const auto& item : catalog.items) texts.push_back(item.title + " " + item.description);

    if (ledger) ledger->record(Role::Embedder);
    std::vector<std::vector<double>> raw;
    try {
        raw = embedder.embed(texts);
    } catch (const std::exception& e) {
        throw EcpoError(std::string("embedder failed over catalog: ") + e.what());
    }
    if (raw.size() != catalog.items.size())
        throw EcpoError("embedder returned wrong vector count");

    EmbeddingIndex index;
    index.dim = embedder.dimension();
    for (std::size_t i = 0; i < catalog.items.size(); ++i) {
        if (static_cast<int>(raw[i].size()) != index.dim)
            throw EcpoError("embedder dimension mismatch for item " +
                            catalog.items[i].item_id);
        normalize_unit(raw[i], "item " + catalog.items[i].item_id);
        index.vectors.emplace_back(catalog.items[i].item_id, std::move(raw[i]));
    }
    std::sort(index.vectors.begin(), index.vectors.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return index;
}

namespace {

constexpr char kIndexMagic[8] = {'E', 'C', 'P', 'O', 'I', 'D', 'X', '1'};

template <typename T>
void write_pod(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError("truncated index file");
    return value;
}

}  // namespace

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw EcpoError("cannot write index: " + path.string());
    out.write(kIndexMagic, sizeof(kIndexMagic));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(index.dim));
    write_pod<std::uint8_t>(out, 1);  // unit-normalized
    write_pod<std::uint64_t>(out, index.vectors.size());
    for (const auto& [id, vec] : index.vectors) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        out.write(reinterpret_cast<const char*>(vec.data()),
                  static_cast<std::streamsize>(vec.size() * sizeof(double)));
    }
    if (!out) throw EcpoError("short write: " + path.string());
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EcpoError("cannot open index: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0)
        throw ParseError("not an embedding index file: " + path.string());
    EmbeddingIndex index;
    index.dim = static_cast<int>(read_pod<std::uint32_t>(in));
    auto normalized = read_pod<std::uint8_t>(in);
    if (normalized != 1) throw ParseError("index is not unit-normalized");
    auto count = read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto id_len = read_pod<std::uint32_t>(in);
        std::string id(id_len, '\0');
        in.read(id.data(), id_len);
        std::vector<double> vec(static_cast<std::size_t>(index.dim));
        in.read(reinterpret_cast<char*>(vec.data()),
                static_cast<std::streamsize>(vec.size() * sizeof(double)));
        if (!in) throw ParseError("truncated index file: " + path.string());
        index.vectors.emplace_back(std::move(id), std::move(vec));
    }
    return index;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw EcpoError("cosine: dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

std::vector<ScoredItem> retrieve(const EmbeddingIndex& index, const Catalog& catalog,
                                 const std::string& query, int k, Embedder& embedder,
                                 CallLedger* ledger, const std::set<std::string>* allowed) {
    if (trim(query).empty()) throw EcpoError("empty retrieval query");
    if (k < 1) throw EcpoError("retrieval k must be >= 1");
    if (index.vectors.empty()) throw EcpoError("retrieval over empty index");

    if (ledger) ledger->record(Role::Embedder);
    auto q = embedder.embed({query}).at(0);
    normalize_unit(q, "query");

    std::vector<std::pair<double, const std::string*>> scored;
    scored.reserve(index.vectors.size());
    for (const auto& [id, vec] : index.vectors) {
        if (allowed && !allowed->count(id)) continue;
        scored.emplace_back(cosine(q, vec), &id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return *a.second < *b.second;
    });
    if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<std::size_t>(k));

    std::vector<ScoredItem> out;
    out.reserve(scored.size());
    for (const auto& [score, id] : scored) out.push_back({catalog.item(*id), score});
    return out;
}

}  // namespace ecpo

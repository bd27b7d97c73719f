#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ecpo/types.hpp"

namespace ecpo {

struct Review {
    std::string user_id;
    std::string item_id;
    std::string title;
    std::string review_text;
    double rating = 0.0;
    std::string description;
    std::string domain;
};

// Maps the corpus's field names onto the required schema. Defaults assume
// the canonical names already match.
struct FieldMap {
    std::string user_id = "user_id";
    std::string item_id = "item_id";
    std::string title = "title";
    std::string review_text = "review_text";
    std::string rating = "rating";
    std::string description = "description";  // optional in the corpus
    std::string domain = "domain";            // optional in the corpus
};

struct Catalog {
    std::vector<ItemRef> items;  // distinct, first-seen order
    std::map<std::string, std::size_t> by_id;
    std::map<std::string, std::vector<std::string>> user_items;     // all interactions
    std::map<std::string, std::vector<std::string>> user_positive;  // rating >= threshold
    std::map<std::string, std::vector<Review>> user_reviews;
    double positive_threshold = 4.0;

    const ItemRef& item(const std::string& item_id) const;
    bool has_item(const std::string& item_id) const { return by_id.count(item_id) > 0; }
};

struct IngestConfig {
    FieldMap fields;
    double positive_threshold = 4.0;
};

// Reads a JSONL or CSV review corpus (by extension; .csv needs a header
// row). Throws SchemaError naming the first missing required field and
// EcpoError on an empty corpus.
Catalog ingest_corpus(const std::filesystem::path& path, const IngestConfig& config = {});
Catalog ingest_reviews(const std::vector<Review>& reviews, double positive_threshold = 4.0);

}  // namespace ecpo

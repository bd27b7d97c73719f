#include "ecpo/catalog.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "ecpo/serialization.hpp"

namespace ecpo {

using nlohmann::json;

const ItemRef& Catalog::item(const std::string& item_id) const {
    auto it = by_id.find(item_id);
    if (it == by_id.end()) throw EcpoError("unknown item_id: " + item_id);
    return items[it->second];
}

namespace {

// Minimal CSV reader: quoted fields, doubled quotes, embedded commas and
// newlines inside quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            if (row.size() > 1 || !row[0].empty()) rows.push_back(std::move(row));
            row.clear();
        } else {
            field.push_back(c);
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

double parse_rating(const std::string& raw, std::size_t line_no) {
    try {
        return std::stod(raw);
    } catch (const std::exception&) {
        throw SchemaError("line " + std::to_string(line_no) + ": rating is not numeric: " +
                          raw);
    }
}

std::vector<Review> reviews_from_jsonl(const std::string& text, const FieldMap& fields) {
    std::vector<Review> reviews;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = parse_line(line, line_no);
        auto need = [&](const std::string& field) -> std::string {
            if (!j.contains(field))
                throw SchemaError("line " + std::to_string(line_no) +
                                  ": missing required field '" + field + "'");
            const auto& v = j.at(field);
            return v.is_string() ? v.get<std::string>() : v.dump();
        };
        Review r;
        r.user_id = need(fields.user_id);
        r.item_id = need(fields.item_id);
        r.title = need(fields.title);
        r.review_text = need(fields.review_text);
        r.rating = j.at(fields.rating).is_number()
                       ? j.at(fields.rating).get<double>()
                       : parse_rating(need(fields.rating), line_no);
        if (j.contains(fields.description))
            r.description = j.at(fields.description).get<std::string>();
        if (j.contains(fields.domain)) r.domain = j.at(fields.domain).get<std::string>();
        reviews.push_back(std::move(r));
    }
    return reviews;
}

std::vector<Review> reviews_from_csv(const std::string& text, const FieldMap& fields) {
    auto rows = parse_csv(text);
    if (rows.empty()) throw EcpoError("empty corpus");
    const auto& header = rows.front();
    auto column = [&](const std::string& name, bool required) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        if (required) throw SchemaError("missing required field '" + name + "' in CSV header");
        return -1;
    };
    int c_user = column(fields.user_id, true);
    int c_item = column(fields.item_id, true);
    int c_title = column(fields.title, true);
    int c_review = column(fields.review_text, true);
    int c_rating = column(fields.rating, true);
    int c_desc = column(fields.description, false);
    int c_domain = column(fields.domain, false);

    std::vector<Review> reviews;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        auto cell = [&](int c) {
            return c >= 0 && c < static_cast<int>(row.size()) ? row[static_cast<std::size_t>(c)]
                                                              : std::string();
        };
        Review r;
        r.user_id = cell(c_user);
        r.item_id = cell(c_item);
        r.title = cell(c_title);
        r.review_text = cell(c_review);
        r.rating = parse_rating(cell(c_rating), i + 1);
        r.description = cell(c_desc);
        r.domain = cell(c_domain);
        reviews.push_back(std::move(r));
    }
    return reviews;
}

}  // namespace

Catalog ingest_reviews(const std::vector<Review>& reviews, double positive_threshold) {
    if (reviews.empty()) throw EcpoError("empty corpus");
    Catalog catalog;
    catalog.positive_threshold = positive_threshold;
    for (const auto& r : reviews) {
        if (!catalog.by_id.count(r.item_id)) {
            catalog.by_id[r.item_id] = catalog.items.size();
            catalog.items.push_back({r.item_id, r.title, r.description, r.domain});
        }
        auto& interacted = catalog.user_items[r.user_id];
        if (std::find(interacted.begin(), interacted.end(), r.item_id) == interacted.end())
            interacted.push_back(r.item_id);
        if (r.rating >= positive_threshold) {
            auto& positive = catalog.user_positive[r.user_id];
            if (std::find(positive.begin(), positive.end(), r.item_id) == positive.end())
                positive.push_back(r.item_id);
        }
        catalog.user_reviews[r.user_id].push_back(r);
    }
    return catalog;
}

Catalog ingest_corpus(const std::filesystem::path& path, const IngestConfig& config) {
    std::string text = read_file(path);
    std::vector<Review> reviews = path.extension() == ".csv"
                                      ? reviews_from_csv(text, config.fields)
                                      : reviews_from_jsonl(text, config.fields);
    return ingest_reviews(reviews, config.positive_threshold);
}

}  // namespace ecpo

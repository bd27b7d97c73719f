#include "ecpo/http_provider.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace ecpo {

using nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value && *value ? std::string(value) : fallback;
}

void resolve_credentials(HttpProviderConfig& config) {
    config.base_url = env_or("ECPO_BASE_URL", config.base_url);
    if (config.api_key.empty()) config.api_key = env_or("ECPO_API_KEY", "");
    if (config.api_key.empty())
        throw GatewayError("no API key: set ECPO_API_KEY for the http backend");
}

json post_with_retries(const HttpProviderConfig& config, const std::string& path,
                       const json& body) {
    std::string error;
    for (int attempt = 0; attempt <= config.transport_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
        httplib::Client client(config.base_url);
        client.set_read_timeout(config.timeout_seconds, 0);
        client.set_write_timeout(config.timeout_seconds, 0);
        httplib::Headers headers = {{"Authorization", "Bearer " + config.api_key}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            continue;  // retryable
        }
        if (res->status != 200)
            throw GatewayError("HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw GatewayError(std::string("unparseable provider response: ") + e.what());
        }
    }
    throw GatewayError("gateway exhausted transport retries: " + error);
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
    resolve_credentials(config_);
}

std::string HttpProvider::complete(const CompletionRequest& request) {
    json messages = json::array();
    if (!request.system_prompt.empty())
        messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    for (const auto& m : request.messages)
        messages.push_back({{"role", m.role}, {"content", m.text}});
    json body = {{"model", config_.model},
                 {"messages", messages},
                 {"temperature", request.temperature}};
    json reply = post_with_retries(config_, config_.path, body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw GatewayError(std::string("unexpected completion shape: ") + e.what());
    }
}

HttpEmbeddingClient::HttpEmbeddingClient(HttpProviderConfig config)
    : config_(std::move(config)) {
    resolve_credentials(config_);
}

std::vector<std::vector<double>> HttpEmbeddingClient::embed(
    const std::vector<std::string>& texts) {
    json body = {{"model", config_.model}, {"input", texts}};
    json reply = post_with_retries(config_, "/v1/embeddings", body);
    std::vector<std::vector<double>> out;
    try {
        for (const auto& row : reply.at("data"))
            out.push_back(row.at("embedding").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw GatewayError(std::string("unexpected embeddings shape: ") + e.what());
    }
    if (out.size() != texts.size())
        throw GatewayError("embeddings count mismatch");
    return out;
}

}  // namespace ecpo

#pragma once

#include <string>

#include "ecpo/gateway.hpp"

namespace ecpo {

// Chat-completions provider. Credentials are read from the environment and
// never persisted: ECPO_API_KEY (required), ECPO_BASE_URL (optional override).
struct HttpProviderConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    std::string api_key;         // filled from ECPO_API_KEY when empty
    int transport_retries = 3;   // exponential backoff between attempts
    int timeout_seconds = 60;
};

class HttpProvider : public Provider {
  public:
    // Throws GatewayError when no API key is available, so misconfigured
    // runs fail at construction rather than mid-pipeline.
    explicit HttpProvider(HttpProviderConfig config);

    std::string complete(const CompletionRequest& request) override;
    std::string name() const override { return "http:" + config_.model; }

    const HttpProviderConfig& config() const { return config_; }

  private:
    HttpProviderConfig config_;
};

// Embeddings endpoint client with the same credential rules.
class HttpEmbeddingClient {
  public:
    explicit HttpEmbeddingClient(HttpProviderConfig config);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

  private:
    HttpProviderConfig config_;
};

}  // namespace ecpo

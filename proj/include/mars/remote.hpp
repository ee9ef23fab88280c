#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "mars/embedding.hpp"
#include "mars/gateway.hpp"

namespace mars::gateway {

struct HttpEndpoint {
    std::string url;      // http://host:port/path
    std::string api_key;  // sent as a bearer token when non-empty
    std::chrono::seconds timeout{60};
};

/// Generation over JSON/HTTP:
///   POST {"prompts": [...], "params": {"max_output_tokens", "temperature", "stop"}}
///   200  {"outputs": [...]}
/// Connection failures and 5xx are TransportError; 4xx and malformed bodies are
/// ContentError.
class HttpBackend final : public GenerationBackend {
public:
    HttpBackend(HttpEndpoint endpoint, std::size_t max_context_tokens, bool single_flight = false);

    std::vector<std::string> generate(const std::vector<std::string>& prompts, const GenParams& params) override;
    std::size_t max_context_tokens() const override { return max_context_tokens_; }
    bool single_flight() const override { return single_flight_; }

private:
    HttpEndpoint endpoint_;
    std::size_t max_context_tokens_;
    bool single_flight_;
};

/// Embeddings over JSON/HTTP: POST {"texts": [...]} -> {"embeddings": [[...], ...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(HttpEndpoint endpoint, std::size_t dimension);

    std::vector<Vector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dimension_; }

private:
    HttpEndpoint endpoint_;
    std::size_t dimension_;
};

/// Forwards to `inner` and appends every {prompt, response} pair to a JSONL cassette.
class RecordingBackend final : public GenerationBackend {
public:
    RecordingBackend(GenerationBackend& inner, const std::filesystem::path& cassette);

    std::vector<std::string> generate(const std::vector<std::string>& prompts, const GenParams& params) override;
    std::size_t max_context_tokens() const override { return inner_.max_context_tokens(); }
    bool single_flight() const override { return inner_.single_flight(); }

private:
    GenerationBackend& inner_;
    std::mutex mutex_;
    std::ofstream out_;
};

/// Answers from a cassette; a prompt that was never recorded is a ContentError.
class ReplayBackend final : public GenerationBackend {
public:
    explicit ReplayBackend(const std::filesystem::path& cassette, std::size_t max_context_tokens = 1 << 20);

    std::vector<std::string> generate(const std::vector<std::string>& prompts, const GenParams& params) override;
    std::size_t max_context_tokens() const override { return max_context_tokens_; }
    std::size_t size() const { return responses_.size(); }

private:
    std::map<std::string, std::string> responses_;
    std::size_t max_context_tokens_;
};

}  // namespace mars::gateway

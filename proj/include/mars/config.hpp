#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mars/embedding.hpp"
#include "mars/gateway.hpp"
#include "mars/model.hpp"
#include "mars/taxonomy.hpp"

namespace mars::config {

enum class BackendKind { mock, remote, replay };

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string endpoint;            // remote generation URL
    std::string embedding_endpoint;  // remote embedding URL; empty = hash provider
    std::size_t embedding_dimension = 128;
    std::string api_key;
    std::size_t max_context_tokens = 4096;
    bool single_flight = false;
    std::optional<std::filesystem::path> record;  // cassette to append to
    std::optional<std::filesystem::path> replay;  // cassette to answer from
};

struct BatchingConfig {
    bool enabled = true;
    std::size_t max_batch = 64;
    std::size_t max_wait_us = 10'000;
    std::size_t max_in_flight = 4;
};

struct AppConfig {
    PipelineConfig pipeline;
    BackendConfig backend;
    BatchingConfig batching;
    std::filesystem::path data_dir = MARS_DATA_DIR;
    std::optional<std::filesystem::path> prompts_dir;  // default <data_dir>/prompts
    std::size_t mock_latency_us = 0;
    /// Where each setting came from ("default", "file", "env", "flag").
    std::map<std::string, std::string> sources;
};

/// Applies a YAML config document over `cfg`. Unknown keys are InputError.
void apply_yaml(AppConfig& cfg, const std::string& document);
void apply_file(AppConfig& cfg, const std::filesystem::path& path);
/// MARS_SEED, MARS_TARGET_LANG, MARS_BACKEND, MARS_ENDPOINT,
/// MARS_EMBEDDING_ENDPOINT, MARS_API_KEY, MARS_DATA_DIR.
void apply_env(AppConfig& cfg);

BackendKind parse_backend(std::string_view s);
std::string_view to_string(BackendKind k);

/// One line per setting with its source, for --verbose.
std::string describe(const AppConfig& cfg);

/// Backend, embeddings and prompts built from a config. Owns everything.
class Runtime {
public:
    Runtime(const AppConfig& cfg, const Taxonomy& taxonomy);

    gateway::GenerationBackend& backend() { return *front_; }
    EmbeddingProvider& embeddings() { return *embeddings_; }
    const gateway::PromptSet& prompts() const { return prompts_; }
    gateway::Gateway& gateway() { return *gateway_; }

private:
    gateway::PromptSet prompts_;
    std::unique_ptr<gateway::GenerationBackend> base_;
    std::unique_ptr<gateway::GenerationBackend> recorder_;
    gateway::GenerationBackend* front_ = nullptr;
    std::unique_ptr<EmbeddingProvider> raw_embeddings_;
    std::unique_ptr<EmbeddingProvider> embeddings_;
    std::unique_ptr<gateway::Gateway> gateway_;
};

}  // namespace mars::config

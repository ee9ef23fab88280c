#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "mars/config.hpp"
#include "mars/embedding.hpp"
#include "mars/gateway.hpp"
#include "mars/mock_backend.hpp"
#include "mars/taxonomy.hpp"

namespace mars::test {

inline std::filesystem::path data_dir() { return MARS_DATA_DIR; }
inline std::filesystem::path tests_dir() { return MARS_TESTS_DIR; }

inline const Taxonomy& demo_taxonomy() {
    static const Taxonomy t = load_valid_taxonomy(data_dir() / "demo" / "taxonomy.yml");
    return t;
}

inline const gateway::MockData& demo_mock_data() {
    static const gateway::MockData d = gateway::MockData::load(data_dir() / "mock");
    return d;
}

inline gateway::MockBackend demo_mock(gateway::MockOptions opt = {}) {
    return gateway::MockBackend(gateway::PromptSet::builtin(), demo_taxonomy(), demo_mock_data(), opt);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("mars-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

/// Wraps a provider and counts embed() calls and texts.
class CountingEmbeddings final : public EmbeddingProvider {
public:
    explicit CountingEmbeddings(EmbeddingProvider& inner) : inner_(inner) {}
    std::vector<Vector> embed(const std::vector<std::string>& texts) override {
        ++calls;
        texts_seen += texts.size();
        return inner_.embed(texts);
    }
    std::size_t dimension() const override { return inner_.dimension(); }

    std::atomic<std::size_t> calls{0};
    std::atomic<std::size_t> texts_seen{0};

private:
    EmbeddingProvider& inner_;
};

/// Echo backend: output is "out:" + prompt. Optionally fails on chosen prompts.
class EchoBackend : public gateway::GenerationBackend {
public:
    std::vector<std::string> generate(const std::vector<std::string>& prompts, const gateway::GenParams&) override {
        ++calls;
        batch_sizes.push_back(prompts.size());
        std::vector<std::string> out;
        for (const auto& p : prompts) out.push_back("out:" + p);
        return out;
    }
    std::size_t max_context_tokens() const override { return 1000; }

    std::atomic<std::size_t> calls{0};
    std::vector<std::size_t> batch_sizes;
};

std::string read_file(const std::filesystem::path& p);

}  // namespace mars::test

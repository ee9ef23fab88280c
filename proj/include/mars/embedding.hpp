#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace mars {

using Vector = std::vector<double>;

/// Maps texts to fixed-dimension vectors. Same text, same vector, for the
/// lifetime of one instance. Implementations must tolerate concurrent calls.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t dimension() const = 0;
};

/// embed() plus contract checks: count, dimension, finiteness. Violations
/// surface as BackendError.
std::vector<Vector> checked_embed(EmbeddingProvider& provider, const std::vector<std::string>& texts);
Vector checked_embed_one(EmbeddingProvider& provider, const std::string& text);

/// Hermetic provider: every word token and character trigram of the text is
/// hashed (with the seed) to a pseudo-random Gaussian direction; the text
/// vector is the normalised sum. Shared features give correlated vectors, so
/// "price" and "prices" land close while unrelated words are near-orthogonal.
class HashEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(std::size_t dimension = 128, std::uint64_t seed = 0);

    std::vector<Vector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dimension_; }

    Vector embed_one(const std::string& text) const;

private:
    void add_feature(Vector& acc, const std::string& feature, double weight) const;

    std::size_t dimension_;
    std::uint64_t seed_;
};

/// Fixed text -> vector table; unknown texts are a ContentError.
class TableEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit TableEmbeddingProvider(std::map<std::string, Vector> table);

    std::vector<Vector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::map<std::string, Vector> table_;
    std::size_t dimension_ = 0;
};

/// Memoises vectors per unique string; forwards only unseen texts.
class CachingEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit CachingEmbeddingProvider(EmbeddingProvider& inner) : inner_(inner) {}

    std::vector<Vector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return inner_.dimension(); }

    std::size_t inner_calls() const { return inner_calls_.load(); }
    std::size_t cached() const;

private:
    EmbeddingProvider& inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Vector> cache_;
    std::atomic<std::size_t> inner_calls_{0};
};

}  // namespace mars

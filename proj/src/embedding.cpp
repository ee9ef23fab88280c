#include "mars/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "mars/model.hpp"
#include "mars/text.hpp"

namespace mars {

std::vector<Vector> checked_embed(EmbeddingProvider& provider, const std::vector<std::string>& texts) {
    auto out = provider.embed(texts);
    if (out.size() != texts.size()) {
        throw BackendError("embedding provider returned " + std::to_string(out.size()) + " vectors for " +
                           std::to_string(texts.size()) + " texts");
    }
    const std::size_t d = provider.dimension();
    for (const auto& v : out) {
        if (v.size() != d) throw BackendError("embedding provider returned a vector of wrong dimension");
        for (double x : v) {
            if (!std::isfinite(x)) throw BackendError("embedding provider returned a non-finite component");
        }
    }
    return out;
}

Vector checked_embed_one(EmbeddingProvider& provider, const std::string& text) {
    return std::move(checked_embed(provider, {text}).front());
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {}

void HashEmbeddingProvider::add_feature(Vector& acc, const std::string& feature, double weight) const {
    std::uint64_t state = text::fnv1a(feature) ^ (seed_ * 0x9e3779b97f4a7c15ULL);
    for (std::size_t i = 0; i < dimension_; i += 2) {
        // Box-Muller: two Gaussian components per pair of uniforms.
        const double u1 = unit_open(splitmix64(state));
        const double u2 = unit_open(splitmix64(state));
        const double r = std::sqrt(-2.0 * std::log(u1));
        acc[i] += weight * r * std::cos(2.0 * M_PI * u2);
        if (i + 1 < dimension_) acc[i + 1] += weight * r * std::sin(2.0 * M_PI * u2);
    }
}

Vector HashEmbeddingProvider::embed_one(const std::string& input) const {
    Vector acc(dimension_, 0.0);
    const auto tokens = text::word_tokens(input);
    for (const auto& tok : tokens) {
        add_feature(acc, "w:" + tok, 1.0);
        const std::string padded = "^" + tok + "$";
        // Trigrams over bytes; UTF-8 multi-byte letters simply yield more grams.
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add_feature(acc, "c:" + padded.substr(i, 3), 0.5);
    }
    if (tokens.empty()) add_feature(acc, "raw:" + input, 1.0);

    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : acc) x /= norm;
    return acc;
}

std::vector<Vector> HashEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

TableEmbeddingProvider::TableEmbeddingProvider(std::map<std::string, Vector> table) : table_(std::move(table)) {
    if (!table_.empty()) dimension_ = table_.begin()->second.size();
}

std::vector<Vector> TableEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    for (const auto& t : texts) {
        const auto it = table_.find(t);
        if (it == table_.end()) throw ContentError("no embedding for \"" + t + "\"");
        out.push_back(it->second);
    }
    return out;
}

std::vector<Vector> CachingEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<std::string> missing;
    {
        std::lock_guard lock(mutex_);
        for (const auto& t : texts) {
            if (!cache_.count(t)) missing.push_back(t);
        }
    }
    if (!missing.empty()) {
        // Deduplicate while keeping order so the inner provider sees each text once.
        std::vector<std::string> unique;
        for (auto& m : missing) {
            if (std::find(unique.begin(), unique.end(), m) == unique.end()) unique.push_back(m);
        }
        auto vectors = checked_embed(inner_, unique);
        ++inner_calls_;
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < unique.size(); ++i) cache_.emplace(unique[i], std::move(vectors[i]));
    }
    std::vector<Vector> out;
    out.reserve(texts.size());
    std::lock_guard lock(mutex_);
    for (const auto& t : texts) out.push_back(cache_.at(t));
    return out;
}

std::size_t CachingEmbeddingProvider::cached() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

}  // namespace mars

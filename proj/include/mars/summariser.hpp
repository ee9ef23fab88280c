#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mars/embedding.hpp"
#include "mars/gateway.hpp"
#include "mars/model.hpp"
#include "mars/text.hpp"

namespace mars::summariser {

struct PoolVerbatim {
    std::string text;
    LanguageCode language = LanguageCode::EN;
    std::string review_id;
    std::string insight_id;
    Sentiment sentiment = Sentiment::positive;
};

struct VerbatimPool {
    std::string aspect;
    std::string entity_id;
    std::vector<PoolVerbatim> verbatims;
    int mention_percent = 0;
    std::size_t mentions = 0;  // distinct reviews
};

/// round(100 * mentions / total_reviews).
int mention_percent(std::size_t mentions, std::size_t total_reviews);

/// One pool per L3 of the entity, built from translated verbatims, ranked by
/// mention_percent descending and name ascending on ties. `total_reviews`
/// below the number of distinct reviews seen in the insights is raised to it.
std::vector<VerbatimPool> build_pools(const std::string& entity_id, std::span<const Insight> insights,
                                      std::size_t total_reviews);

/// Uniform integer in [0, bound) by rejection sampling; the same on every platform.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);
/// Uniform double in [0, 1) from the top 53 bits.
double uniform_unit(std::mt19937_64& rng);

struct SelectionStrategy {
    SelectionKind kind = SelectionKind::random;
    std::size_t k = 30;
    std::uint64_t seed = 7;
};

/// Clusters at cosine >= this are treated as near-duplicates by `weighted`.
inline constexpr double kNearDuplicateCosine = 0.9;

/// random: seeded uniform sample without replacement, in sample order.
/// weighted: near-duplicate clusters drawn without replacement with
///   probability proportional to size; representatives ordered by cluster size.
/// centroid: the k verbatims closest to the mean direction, closest first.
/// k >= |pool| returns the whole pool. Empty pools throw std::invalid_argument.
std::vector<PoolVerbatim> select(const VerbatimPool& pool, const SelectionStrategy& strategy,
                                 EmbeddingProvider& embeddings);

struct RecSummOptions {
    std::size_t context_length = 512;  // budget for the summariser input block
    std::size_t word_count = 10;
    std::size_t aspect_count = 1;
    std::string sentiment = "positive";
    text::TokenCounter token_counter = text::whitespace_counter();
    std::size_t max_depth = 8;
};

struct RecSummStats {
    std::size_t calls = 0;
    std::size_t depth = 0;  // levels of recursion; 1 when X fits at once
    std::size_t max_input_tokens = 0;
};

/// Greedy contiguous chunks, each with a token total <= budget. An element
/// above the budget throws ContentError.
std::vector<std::vector<std::string>> chunk_elements(const std::vector<std::string>& elements, std::size_t budget,
                                                     const text::TokenCounter& counter);

/// Renders the summarise prompt for one input block.
std::string summarise_prompt(const gateway::PromptSet& prompts, const std::vector<std::string>& elements,
                             const RecSummOptions& options);

/// Recursive summarisation: one call when X fits in the budget, else summarise
/// each chunk and recurse on the intermediate summaries. Empty input returns "".
std::string rec_summ(const std::vector<std::string>& elements, gateway::Gateway& gateway,
                     const gateway::PromptSet& prompts, const RecSummOptions& options,
                     RecSummStats* stats = nullptr);

/// "39% of the reviews mention Food Quality: <summary>" in the target language.
std::string percent_line(LanguageCode lang, int percent, const std::string& aspect, const std::string& summary);

/// Aspect summaries for every aspect of the entity and the overall summary over
/// the top aspects. Throws InputError when the entity has no insights.
SummaryBundle summarise_entity(const std::string& entity_id, std::span<const Insight> insights,
                               std::size_t total_reviews, gateway::Gateway& gateway,
                               const gateway::PromptSet& prompts, EmbeddingProvider& embeddings,
                               const PipelineConfig& config, std::vector<std::string>* warnings = nullptr);

}  // namespace mars::summariser

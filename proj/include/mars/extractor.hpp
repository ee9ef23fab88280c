#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mars/embedding.hpp"
#include "mars/gateway.hpp"
#include "mars/matcher.hpp"
#include "mars/model.hpp"
#include "mars/taxonomy.hpp"

namespace mars::extractor {

struct PhaseRecord {
    gateway::TemplateName phase;
    std::string prompt;
    std::string response;
};

/// One generated aspect through phases 2-4 and standardisation.
struct AspectRecord {
    std::string generated;
    Sentiment sentiment = Sentiment::positive;
    std::vector<std::string> source;      // grounded verbatims
    std::vector<std::string> translated;  // aligned with source
    std::optional<matcher::MatchOutcome> match;
    bool kept = false;
};

struct ExtractionTrace {
    std::string review_id;
    std::vector<PhaseRecord> phase_prompts;
    std::vector<std::string> aspects;  // the parsed aspect list
    std::vector<AspectRecord> records;
    std::size_t prompt_count = 0;
    std::vector<std::string> warnings;
    /// False when the review was abandoned (unparseable sentiment, backend failure).
    bool completed = false;
    std::optional<std::string> failure;
};

struct ExtractionResult {
    std::vector<Insight> insights;
    ExtractionTrace trace;
};

/// Comma- or line-separated names; bullets, numbering, quotes and a trailing
/// period are stripped, duplicates (case-insensitive) dropped.
std::vector<std::string> parse_aspect_list(std::string_view response);
/// One of positive/negative/both, leniently; nullopt otherwise.
std::optional<Sentiment> parse_sentiment_response(std::string_view response);
/// Non-empty lines with bullets, numbering and surrounding quotes stripped.
std::vector<std::string> parse_lines(std::string_view response);

/// Records with the same L3 are merged: verbatims unioned, sentiments combined.
std::vector<Insight> merge_insights(std::vector<Insight> insights);

class Extractor {
public:
    Extractor(gateway::Gateway& gateway, const gateway::PromptSet& prompts, const Taxonomy& taxonomy,
              EmbeddingProvider& embeddings, const PipelineConfig& config,
              matcher::NewAspectRegistry* registry = nullptr);
    Extractor(gateway::Gateway&, gateway::PromptSet&&, const Taxonomy&, EmbeddingProvider&, const PipelineConfig&,
              matcher::NewAspectRegistry* = nullptr) = delete;

    /// The 3N+1 protocol for one review. Backend failures are recorded in the
    /// trace (completed = false, failure set) rather than thrown.
    ExtractionResult extract(const Review& review) const;

    const PipelineConfig& config() const { return config_; }

private:
    std::string ask(ExtractionTrace& trace, gateway::TemplateName phase, const gateway::Vars& vars) const;
    std::vector<std::string> ground(const Review& review, const std::vector<std::string>& verbatims,
                                    ExtractionTrace& trace) const;
    Insight to_insight(const Review& review, const AspectRecord& rec) const;

    gateway::Gateway& gateway_;
    const gateway::PromptSet& prompts_;
    const Taxonomy& taxonomy_;
    EmbeddingProvider& embeddings_;
    PipelineConfig config_;
    matcher::NewAspectRegistry* registry_;
};

struct ClrStats {
    std::string domain;
    std::size_t n_reviews = 0;
    std::size_t n_verbatims = 0;
    double avg_tokens_per_review = 0.0;    // ATL/R
    double avg_tokens_per_verbatim = 0.0;  // ATL/V
    int clr_percent = 0;
};

/// round(100 * (1 - atl_v / atl_r)). Requires atl_r > 0.
int clr_percent(double atl_r, double atl_v);
/// Whitespace-token statistics over reviews and the source verbatims of insights.
ClrStats compute_clr(std::string domain, std::span<const Review> reviews, std::span<const Insight> insights);

struct CorpusExtraction {
    std::vector<ExtractionResult> results;  // input order
    ClrStats clr;
    std::vector<std::string> warnings;      // "<review_id>: <warning>"

    std::vector<Insight> insights() const;
};

/// Extracts every review on the OpenMP pool. Throws BackendError when any
/// review failed in the backend.
CorpusExtraction extract_corpus(std::span<const Review> reviews, const Extractor& extractor,
                                std::string domain = "corpus");

double f1_score(double precision, double recall);

struct ExtractionScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double translation_accuracy = 0.0;
    std::size_t true_positives = 0;
    std::size_t predicted = 0;
    std::size_t gold = 0;
};

struct ScoringOptions {
    double verbatim_jaccard = 0.5;
    double translation_cosine = 0.9;
};

/// Greedy one-to-one matching; a prediction is a true positive when review,
/// L3 and sentiment agree and some source verbatim pair reaches the Jaccard
/// threshold. Empty gold throws InputError.
ExtractionScores score_extraction(std::span<const Insight> predicted, std::span<const Insight> gold,
                                  EmbeddingProvider& embeddings, const ScoringOptions& options = {});

/// On-disk insight store: `<dir>/insights/<entity>.jsonl`, append-only, and
/// `<dir>/index.json` mapping entity -> {reviews, offsets}.
struct EntityInsights {
    std::vector<Insight> insights;
    std::size_t review_count = 0;
};

void write_insight_store(const std::filesystem::path& dir, std::span<const Review> reviews,
                         std::span<const Insight> insights);
std::map<std::string, EntityInsights> read_insight_store(const std::filesystem::path& dir);

}  // namespace mars::extractor

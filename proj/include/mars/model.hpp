#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mars {

/// Malformed user input: corpus lines, config, taxonomy files, CLI flags.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Generation/embedding backend failures.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The backend could not be reached or the call failed in transit; retried once.
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

/// The backend answered, but the answer is unusable; never retried.
class ContentError : public BackendError {
public:
    using BackendError::BackendError;
};

enum class LanguageCode { EN, ES, FR, DE, IT };

inline constexpr std::array<LanguageCode, 5> kAllLanguages{
    LanguageCode::EN, LanguageCode::ES, LanguageCode::FR, LanguageCode::DE, LanguageCode::IT};

std::string_view to_string(LanguageCode lang);
/// Accepts the five codes case-insensitively; anything else throws InputError.
LanguageCode parse_language(std::string_view code);
/// English display name ("Spanish"), used inside prompts.
std::string_view language_name(LanguageCode lang);

enum class Sentiment { positive, negative, both };

std::string_view to_string(Sentiment s);
/// Case-insensitive; "neutral" and anything else throws InputError.
Sentiment parse_sentiment(std::string_view label);
/// Combining rule used when two records for one aspect merge.
Sentiment combine(Sentiment a, Sentiment b);

struct Review {
    std::string review_id;
    std::string entity_id;
    LanguageCode language = LanguageCode::EN;
    std::string text;
    std::optional<int> rating;

    /// Builds a review, enforcing non-empty trimmed text and rating in 1..5.
    static Review make(std::string review_id, std::string entity_id, LanguageCode language,
                       std::string text, std::optional<int> rating = std::nullopt);
};

struct Verbatim {
    std::string text;
    LanguageCode language = LanguageCode::EN;

    bool operator==(const Verbatim&) const = default;
};

struct Insight {
    std::string entity_id;
    std::string review_id;
    std::string l1_aspect;
    std::string l2_aspect;
    std::string l3_aspect;
    std::optional<std::string> l4_aspect;
    bool new_aspect = false;
    Sentiment sentiment = Sentiment::positive;
    std::vector<Verbatim> source_verbatims;
    std::vector<Verbatim> translated_verbatims;

    /// `<review_id>/<l3_aspect>`; unique because aspects merge per review.
    std::string id() const { return review_id + "/" + l3_aspect; }

    bool operator==(const Insight&) const = default;
};

/// Throws InputError when the quadruple invariants do not hold for `target`.
void check_insight(const Insight& insight, LanguageCode target);

struct SummaryBundle {
    std::string entity_id;
    LanguageCode target_language = LanguageCode::EN;
    std::map<std::string, std::string> aspect_summaries;
    std::string overall_summary;
    std::map<std::string, std::string> overall_by_sentiment;
    /// Keys are "aspect:<name>" and "overall"; values are insight ids.
    std::map<std::string, std::vector<std::string>> provenance;
    std::map<std::string, int> aspect_stats;
};

enum class SelectionKind { random, weighted, centroid };

std::string_view to_string(SelectionKind k);
SelectionKind parse_selection(std::string_view s);

struct MatchThresholds {
    double sem_replace = 0.95;
    double sem_l4_topic = 0.7;
    double sem_l4_verbatim = 0.4;
};

enum class OverallMode { per_sentiment, mixed };

struct PipelineConfig {
    LanguageCode target_language = LanguageCode::EN;
    std::size_t context_length = 512;
    std::size_t top_aspect_count = 5;
    std::size_t words_per_aspect = 10;
    MatchThresholds thresholds;
    SelectionKind selection_strategy = SelectionKind::random;
    std::size_t selection_pool_size = 30;
    std::uint64_t random_seed = 7;
    OverallMode overall_mode = OverallMode::per_sentiment;
    double grounding_jaccard = 0.5;

    /// Throws InputError on violated threshold ordering or l < 32.
    void validate() const;
};

}  // namespace mars

#include "mars/model.hpp"

#include "mars/text.hpp"

namespace mars {

std::string_view to_string(LanguageCode lang) {
    switch (lang) {
        case LanguageCode::EN: return "EN";
        case LanguageCode::ES: return "ES";
        case LanguageCode::FR: return "FR";
        case LanguageCode::DE: return "DE";
        case LanguageCode::IT: return "IT";
    }
    return "EN";
}

LanguageCode parse_language(std::string_view code) {
    const std::string folded = text::casefold(text::trim(code));
    for (auto lang : kAllLanguages) {
        if (folded == text::casefold(to_string(lang))) return lang;
    }
    throw InputError("unsupported language \"" + std::string(code) + "\"");
}

std::string_view language_name(LanguageCode lang) {
    switch (lang) {
        case LanguageCode::EN: return "English";
        case LanguageCode::ES: return "Spanish";
        case LanguageCode::FR: return "French";
        case LanguageCode::DE: return "German";
        case LanguageCode::IT: return "Italian";
    }
    return "English";
}

std::string_view to_string(Sentiment s) {
    switch (s) {
        case Sentiment::positive: return "positive";
        case Sentiment::negative: return "negative";
        case Sentiment::both: return "both";
    }
    return "positive";
}

Sentiment parse_sentiment(std::string_view label) {
    const std::string folded = text::casefold(text::trim(label));
    if (folded == "positive") return Sentiment::positive;
    if (folded == "negative") return Sentiment::negative;
    if (folded == "both") return Sentiment::both;
    throw InputError("unsupported sentiment \"" + std::string(label) +
                     "\" (expected positive, negative or both)");
}

Sentiment combine(Sentiment a, Sentiment b) {
    return a == b ? a : Sentiment::both;
}

Review Review::make(std::string review_id, std::string entity_id, LanguageCode language,
                    std::string text, std::optional<int> rating) {
    if (review_id.empty()) throw InputError("review_id must not be empty");
    if (text::trim(text).empty()) throw InputError("review " + review_id + " has empty text");
    if (rating && (*rating < 1 || *rating > 5)) {
        throw InputError("review " + review_id + " rating out of range 1-5");
    }
    return Review{std::move(review_id), std::move(entity_id), language, std::move(text), rating};
}

void check_insight(const Insight& insight, LanguageCode target) {
    const std::string who = "insight " + insight.id();
    if (insight.l3_aspect.empty()) throw InputError(who + ": empty l3_aspect");
    if (insight.source_verbatims.empty()) throw InputError(who + ": no source verbatims");
    if (insight.translated_verbatims.size() != insight.source_verbatims.size()) {
        throw InputError(who + ": translated/source verbatim count mismatch");
    }
    for (const auto& v : insight.translated_verbatims) {
        if (v.language != target) {
            throw InputError(who + ": translated verbatim tagged " + std::string(to_string(v.language)) +
                             ", expected " + std::string(to_string(target)));
        }
    }
}

std::string_view to_string(SelectionKind k) {
    switch (k) {
        case SelectionKind::random: return "random";
        case SelectionKind::weighted: return "weighted";
        case SelectionKind::centroid: return "centroid";
    }
    return "random";
}

SelectionKind parse_selection(std::string_view s) {
    const std::string folded = text::casefold(text::trim(s));
    if (folded == "random") return SelectionKind::random;
    if (folded == "weighted") return SelectionKind::weighted;
    if (folded == "centroid") return SelectionKind::centroid;
    throw InputError("unknown selection strategy \"" + std::string(s) + "\"");
}

void PipelineConfig::validate() const {
    const auto& t = thresholds;
    if (!(t.sem_l4_topic > 0.0 && t.sem_l4_topic < t.sem_replace && t.sem_replace <= 1.0)) {
        throw InputError("thresholds must satisfy 0 < sem_l4_topic < sem_replace <= 1");
    }
    if (!(t.sem_l4_verbatim > 0.0 && t.sem_l4_verbatim <= 1.0)) {
        throw InputError("threshold sem_l4_verbatim must be in (0, 1]");
    }
    if (context_length < 32) throw InputError("context_length must be >= 32");
    if (top_aspect_count < 1) throw InputError("top_aspect_count must be >= 1");
    if (words_per_aspect < 1) throw InputError("words_per_aspect must be >= 1");
    if (selection_pool_size < 1) throw InputError("selection pool size must be >= 1");
}

}  // namespace mars

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mars/model.hpp"

namespace mars::segmenter {

/// How a delimiter is recognised in text.
enum class DelimiterKind {
    literal,  // exact characters, anywhere ("!", "¿", ",")
    period,   // a run of '.' followed by whitespace or end of text
    word,     // whole word(s), case-insensitive ("but", "parce que")
};

struct Delimiter {
    std::string text;
    DelimiterKind kind = DelimiterKind::literal;
};

struct SegmentRuleSet {
    LanguageCode language = LanguageCode::EN;
    std::vector<Delimiter> sentence_delimiters;
    std::vector<Delimiter> phrase_delimiters;
    std::size_t min_phrase_words = 2;
};

inline constexpr int kRuleTableVersion = 1;

/// The built-in table for one language; delimiters ordered longest first.
const SegmentRuleSet& rules_for(LanguageCode lang);
nlohmann::json rules_to_json(const SegmentRuleSet& rules);

struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const Span&) const = default;
};

struct Segment {
    std::string text;
    std::string review_id;
    Span char_span;  // byte offsets into the review text
    LanguageCode language = LanguageCode::EN;
};

/// A delimiter occurrence found in some text: [start, end) in bytes.
struct DelimiterMatch {
    std::size_t start;
    std::size_t end;
};

/// All non-overlapping occurrences scanning left to right, longest match first.
std::vector<DelimiterMatch> find_delimiters(std::string_view text, const std::vector<Delimiter>& delims);

std::vector<Segment> split_sentences(const Review& review);
std::vector<Segment> split_phrases(const Segment& sentence);
std::vector<Segment> segment(const Review& review);

}  // namespace mars::segmenter

#include "mars/segmenter.hpp"

#include <algorithm>
#include <optional>

#include "mars/text.hpp"

namespace mars::segmenter {

namespace {

Delimiter lit(std::string s) { return {std::move(s), DelimiterKind::literal}; }
Delimiter word(std::string s) { return {std::move(s), DelimiterKind::word}; }
Delimiter period() { return {".", DelimiterKind::period}; }

SegmentRuleSet make_rules(LanguageCode lang, std::vector<Delimiter> sentence, std::vector<Delimiter> phrase) {
    auto by_length = [](const Delimiter& a, const Delimiter& b) { return a.text.size() > b.text.size(); };
    std::stable_sort(sentence.begin(), sentence.end(), by_length);
    std::stable_sort(phrase.begin(), phrase.end(), by_length);
    return SegmentRuleSet{lang, std::move(sentence), std::move(phrase), 2};
}

const std::vector<SegmentRuleSet>& all_rules() {
    static const std::vector<SegmentRuleSet> table = {
        make_rules(LanguageCode::EN, {period(), lit("!"), lit("?"), word("but")},
                   {lit(","), lit(";"), lit("&"), word("and"), word("because")}),
        make_rules(LanguageCode::ES, {period(), lit("!"), lit("?"), lit("¡"), lit("¿"), word("pero")},
                   {lit(","), lit(";"), word("porque"), word("y")}),
        make_rules(LanguageCode::FR, {period(), lit("!"), lit("?"), word("mais")},
                   {lit(","), lit(";"), word("parce que"), word("et")}),
        make_rules(LanguageCode::DE, {period(), lit("!"), lit("?"), word("aber")},
                   {lit(","), lit(";"), word("weil"), word("und")}),
        make_rules(LanguageCode::IT, {period(), lit("!"), lit("?"), word("ma")},
                   {lit(","), lit(";"), word("perché"), word("e")}),
    };
    return table;
}

bool word_char_before(std::string_view s, std::size_t pos) {
    if (pos == 0) return false;
    std::size_t b = pos - 1;
    while (b > 0 && (static_cast<unsigned char>(s[b]) & 0xC0) == 0x80) --b;
    return text::is_word_char(text::decode_utf8(s, b).cp);
}

bool word_char_at(std::string_view s, std::size_t pos) {
    return pos < s.size() && text::is_word_char(text::decode_utf8(s, pos).cp);
}

// `folded` is the casefolded text; folding preserves byte offsets.
std::optional<std::size_t> match_at(std::string_view text, std::string_view folded, std::size_t pos,
                                    const Delimiter& d) {
    switch (d.kind) {
        case DelimiterKind::literal:
            if (text.compare(pos, d.text.size(), d.text) == 0) return pos + d.text.size();
            return std::nullopt;
        case DelimiterKind::period: {
            if (text[pos] != '.') return std::nullopt;
            std::size_t e = pos;
            while (e < text.size() && text[e] == '.') ++e;
            if (e == text.size() || text::is_space(text[e])) return e;
            return std::nullopt;
        }
        case DelimiterKind::word: {
            if (word_char_before(folded, pos)) return std::nullopt;
            std::size_t cur = pos;
            const auto words = text::whitespace_tokens(d.text);
            for (std::size_t w = 0; w < words.size(); ++w) {
                if (w > 0) {
                    const std::size_t ws = cur;
                    while (cur < folded.size() && text::is_space(folded[cur])) ++cur;
                    if (cur == ws) return std::nullopt;
                }
                if (folded.compare(cur, words[w].size(), words[w]) != 0) return std::nullopt;
                cur += words[w].size();
            }
            if (word_char_at(folded, cur)) return std::nullopt;
            return cur;
        }
    }
    return std::nullopt;
}

std::optional<Segment> make_segment(const Segment& parent_like, std::string_view text, std::size_t base,
                                    std::size_t begin, std::size_t end) {
    while (begin < end && text::is_space(text[begin])) ++begin;
    while (end > begin && text::is_space(text[end - 1])) --end;
    if (begin == end) return std::nullopt;
    Segment s;
    s.text = std::string(text.substr(begin, end - begin));
    s.review_id = parent_like.review_id;
    s.language = parent_like.language;
    s.char_span = {base + begin, base + end};
    return s;
}

}  // namespace

const SegmentRuleSet& rules_for(LanguageCode lang) {
    for (const auto& r : all_rules()) {
        if (r.language == lang) return r;
    }
    throw InputError("no segmentation rules for language " + std::string(to_string(lang)));
}

nlohmann::json rules_to_json(const SegmentRuleSet& rules) {
    auto list = [](const std::vector<Delimiter>& ds) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& d : ds) {
            const char* kind = d.kind == DelimiterKind::word     ? "word"
                               : d.kind == DelimiterKind::period ? "period"
                                                                 : "literal";
            arr.push_back({{"text", d.text}, {"kind", kind}});
        }
        return arr;
    };
    return {{"version", kRuleTableVersion},
            {"language", to_string(rules.language)},
            {"sentence_delimiters", list(rules.sentence_delimiters)},
            {"phrase_delimiters", list(rules.phrase_delimiters)},
            {"min_phrase_words", rules.min_phrase_words}};
}

std::vector<DelimiterMatch> find_delimiters(std::string_view text, const std::vector<Delimiter>& delims) {
    const std::string folded = text::casefold(text);
    std::vector<DelimiterMatch> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::optional<std::size_t> hit;
        for (const auto& d : delims) {
            if ((hit = match_at(text, folded, i, d))) break;
        }
        if (hit) {
            out.push_back({i, *hit});
            i = *hit;
        } else {
            i += text::decode_utf8(text, i).length;
        }
    }
    return out;
}

std::vector<Segment> split_sentences(const Review& review) {
    const auto& rules = rules_for(review.language);
    const std::string_view text = review.text;
    Segment proto;
    proto.review_id = review.review_id;
    proto.language = review.language;

    std::vector<Segment> out;
    std::size_t cur = 0;
    for (const auto& m : find_delimiters(text, rules.sentence_delimiters)) {
        if (auto s = make_segment(proto, text, 0, cur, m.start)) out.push_back(std::move(*s));
        cur = m.end;
    }
    if (auto s = make_segment(proto, text, 0, cur, text.size())) out.push_back(std::move(*s));
    return out;
}

std::vector<Segment> split_phrases(const Segment& sentence) {
    const auto& rules = rules_for(sentence.language);
    const std::string_view text = sentence.text;
    const std::size_t base = sentence.char_span.start;
    const std::size_t min_words = std::max<std::size_t>(rules.min_phrase_words, 2);

    // A sentence below the minimum passes through whole.
    if (text::word_count(text) < min_words) return {sentence};

    std::vector<Segment> out;
    std::size_t cur = 0;
    for (const auto& m : find_delimiters(text, rules.phrase_delimiters)) {
        const auto left = text::trim(text.substr(cur, m.start - cur));
        const auto right = text::trim(text.substr(m.end));
        // Punctuation at an edge is trimmed; an edge word delimiter is a word and stays.
        const bool edge_punct = (left.empty() || right.empty()) && text::word_count(text.substr(m.start, m.end - m.start)) == 0;
        const bool apply = edge_punct ||
                           (text::word_count(left) >= min_words && text::word_count(right) >= min_words);
        if (!apply) continue;
        if (auto s = make_segment(sentence, text, base, cur, m.start)) out.push_back(std::move(*s));
        cur = m.end;
    }
    if (auto s = make_segment(sentence, text, base, cur, text.size())) out.push_back(std::move(*s));
    return out;
}

std::vector<Segment> segment(const Review& review) {
    std::vector<Segment> out;
    for (const auto& sentence : split_sentences(review)) {
        for (auto& phrase : split_phrases(sentence)) out.push_back(std::move(phrase));
    }
    return out;
}

}  // namespace mars::segmenter

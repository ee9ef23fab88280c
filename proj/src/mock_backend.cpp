#include "mars/mock_backend.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "mars/segmenter.hpp"
#include "mars/text.hpp"

namespace mars::gateway {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

bool word_boundary_before(std::string_view s, std::size_t pos) {
    if (pos == 0) return true;
    std::size_t b = pos - 1;
    while (b > 0 && (static_cast<unsigned char>(s[b]) & 0xC0) == 0x80) --b;
    return !text::is_word_char(text::decode_utf8(s, b).cp);
}

bool word_boundary_at(std::string_view s, std::size_t pos) {
    return pos >= s.size() || !text::is_word_char(text::decode_utf8(s, pos).cp);
}

// Splits a whitespace token into leading punctuation, core and trailing punctuation.
struct TokenParts {
    std::string_view lead, core, tail;
};

TokenParts token_parts(std::string_view tok) {
    std::size_t b = 0;
    while (b < tok.size()) {
        const auto d = text::decode_utf8(tok, b);
        if (text::is_alnum(d.cp)) break;
        b += d.length;
    }
    std::size_t e = b;
    std::size_t last = b;
    while (e < tok.size()) {
        const auto d = text::decode_utf8(tok, e);
        e += d.length;
        if (text::is_word_char(d.cp)) last = e;
    }
    return {tok.substr(0, b), tok.substr(b, last - b), tok.substr(last)};
}

}  // namespace

std::size_t find_word(std::string_view folded, std::string_view word, std::size_t from) {
    if (word.empty()) return std::string_view::npos;
    for (std::size_t pos = folded.find(word, from); pos != std::string_view::npos; pos = folded.find(word, pos + 1)) {
        if (word_boundary_before(folded, pos) && word_boundary_at(folded, pos + word.size())) return pos;
    }
    return std::string_view::npos;
}

LanguageCode language_from_name(std::string_view name) {
    const std::string folded = text::casefold(text::trim(name));
    for (auto lang : kAllLanguages) {
        if (folded == text::casefold(language_name(lang)) || folded == text::casefold(to_string(lang))) return lang;
    }
    throw ContentError("unknown language name \"" + std::string(name) + "\"");
}

void MockData::add_lexicon(LanguageCode lang, const std::vector<std::string>& positive,
                           const std::vector<std::string>& negative) {
    auto& lex = lexicons[lang];
    for (const auto& w : positive) lex.positive.insert(text::casefold(w));
    for (const auto& w : negative) lex.negative.insert(text::casefold(w));
}

void MockData::add_row(const std::map<LanguageCode, std::string>& row) {
    for (const auto& [from, src] : row) {
        for (const auto& [to, dst] : row) {
            if (from != to) dictionary[{from, to}].emplace(text::casefold(src), dst);
        }
    }
}

MockData MockData::load(const std::filesystem::path& dir) {
    MockData data;
    const auto lex = read_json(dir / "lexicon.json");
    for (const auto& [code, lists] : lex.items()) {
        data.add_lexicon(parse_language(code), lists.value("positive", std::vector<std::string>{}),
                         lists.value("negative", std::vector<std::string>{}));
    }
    const auto dict = read_json(dir / "dictionary.json");
    if (!dict.is_array()) throw InputError("dictionary.json must be an array of rows");
    for (const auto& row : dict) {
        std::map<LanguageCode, std::string> entry;
        for (const auto& [code, word] : row.items()) entry.emplace(parse_language(code), word.get<std::string>());
        data.add_row(entry);
    }
    return data;
}

MockBackend::MockBackend(PromptSet prompts, Taxonomy taxonomy, MockData data, MockOptions options)
    : prompts_(std::move(prompts)), taxonomy_(std::move(taxonomy)), data_(std::move(data)), options_(options) {}

void MockBackend::reset_counters() {
    calls_ = 0;
    prompts_seen_ = 0;
}

std::vector<std::string> MockBackend::generate(const std::vector<std::string>& prompts, const GenParams&) {
    ++calls_;
    prompts_seen_ += prompts.size();
    for (const auto& p : prompts) {
        if (text::whitespace_token_count(p) > options_.max_context_tokens) {
            throw PromptTooLong("mock backend: prompt exceeds context window");
        }
    }
    auto delay = std::chrono::duration_cast<std::chrono::nanoseconds>(options_.call_latency) +
                 std::chrono::duration_cast<std::chrono::nanoseconds>(options_.prompt_latency) *
                     static_cast<long>(prompts.size());
    if (options_.token_latency.count() > 0) {
        std::size_t tokens = 0;
        for (const auto& p : prompts) tokens += text::whitespace_token_count(p);
        delay += options_.token_latency * static_cast<long>(tokens);
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);

    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(respond(p));
    return out;
}

std::string MockBackend::respond(const std::string& prompt) const {
    const auto phase = prompts_.detect(prompt);
    if (!phase) throw ContentError("mock backend: unrecognised prompt");
    const auto vars = prompts_.get(*phase).match(prompt);
    if (!vars) throw ContentError("mock backend: prompt does not fit the " + std::string(to_string(*phase)) +
                                  " template");
    switch (*phase) {
        case TemplateName::aspect_id: return aspects(*vars);
        case TemplateName::sentiment: return sentiment(*vars);
        case TemplateName::verbatim: return verbatims(*vars);
        case TemplateName::translate: return translate(*vars);
        case TemplateName::summarise: return summarise(*vars);
    }
    throw ContentError("mock backend: unrecognised prompt");
}

std::vector<std::string> MockBackend::keywords_of(const std::string& aspect) const {
    std::vector<std::string> out;
    if (const auto* a = taxonomy_.find_l3(aspect)) {
        out.push_back(text::casefold(a->name));
        for (const auto& k : a->keywords) out.push_back(text::casefold(k));
    } else {
        out.push_back(text::casefold(text::trim(aspect)));
    }
    return out;
}

std::vector<std::string> MockBackend::mentioning(const std::string& context, LanguageCode lang,
                                                 const std::vector<std::string>& keywords) const {
    Review r;
    r.review_id = "mock";
    r.language = lang;
    r.text = context;
    std::vector<std::string> out;
    for (const auto& seg : segmenter::segment(r)) {
        const std::string folded = text::casefold(seg.text);
        const bool hit = std::any_of(keywords.begin(), keywords.end(),
                                     [&](const std::string& k) { return find_word(folded, k) != std::string::npos; });
        if (hit) out.push_back(seg.text);
    }
    return out;
}

std::string MockBackend::aspects(const Vars& v) const {
    const std::string folded = text::casefold(v.at("context"));
    std::vector<std::pair<std::size_t, std::size_t>> found;  // (first position, taxonomy index)
    const auto& l3 = taxonomy_.l3();
    for (std::size_t i = 0; i < l3.size(); ++i) {
        std::size_t first = std::string::npos;
        for (const auto& k : keywords_of(l3[i].name)) first = std::min(first, find_word(folded, k));
        if (first != std::string::npos) found.emplace_back(first, i);
    }
    std::sort(found.begin(), found.end());
    std::vector<std::string> names;
    for (const auto& [pos, i] : found) names.push_back(l3[i].name);
    return text::join(names, ", ");
}

std::string MockBackend::sentiment(const Vars& v) const {
    const LanguageCode lang = language_from_name(v.at("language"));
    auto scope = mentioning(v.at("context"), lang, keywords_of(v.at("aspect")));
    if (scope.empty()) scope.push_back(v.at("context"));

    bool pos = false, neg = false;
    const auto it = data_.lexicons.find(lang);
    if (it != data_.lexicons.end()) {
        for (const auto& s : scope) {
            for (const auto& w : text::word_tokens(s)) {
                pos = pos || it->second.positive.count(w);
                neg = neg || it->second.negative.count(w);
            }
        }
    }
    if (pos && neg) return "both";
    return neg ? "negative" : "positive";
}

std::string MockBackend::verbatims(const Vars& v) const {
    const LanguageCode lang = language_from_name(v.at("language"));
    return text::join(mentioning(v.at("context"), lang, keywords_of(v.at("aspect"))), "\n");
}

std::string MockBackend::translate(const Vars& v) const {
    const LanguageCode from = language_from_name(v.at("language"));
    const LanguageCode to = language_from_name(v.at("target_language"));
    const auto lines = text::split_lines(v.at("verbatims"));
    if (from == to) return text::join(lines, "\n");

    static const std::map<std::string, std::string> empty;
    const auto dit = data_.dictionary.find({from, to});
    const auto& dict = dit == data_.dictionary.end() ? empty : dit->second;

    std::vector<std::string> out;
    for (const auto& line : lines) {
        std::vector<std::string> words;
        for (auto tok : text::whitespace_tokens(line)) {
            const auto parts = token_parts(tok);
            const auto hit = dict.find(text::casefold(parts.core));
            if (parts.core.empty() || hit == dict.end()) {
                words.emplace_back(tok);
                continue;
            }
            std::string word = hit->second;
            const bool capital = parts.core.front() >= 'A' && parts.core.front() <= 'Z';
            if (capital && !word.empty() && word.front() >= 'a' && word.front() <= 'z') word.front() -= 'a' - 'A';
            words.push_back(std::string(parts.lead) + word + std::string(parts.tail));
        }
        out.push_back(text::join(words, " "));
    }
    return text::join(out, "\n");
}

std::string MockBackend::summarise(const Vars& v) const {
    std::size_t budget = 0;
    try {
        budget = std::stoul(v.at("word_count"));
    } catch (const std::exception&) {
        throw ContentError("mock backend: word_count is not a number");
    }
    std::vector<std::string> lines;
    for (const auto& l : text::split_lines(v.at("percent_contribution"))) {
        if (!text::trim(l).empty()) lines.push_back(l);
    }
    if (lines.empty() || budget == 0) return "";
    if (lines.size() > budget) lines.resize(budget);
    const std::size_t per_line = budget / lines.size();

    std::vector<std::string> heads;
    for (const auto& l : lines) {
        auto toks = text::whitespace_tokens(l);
        if (toks.size() > per_line) toks.resize(per_line);
        std::vector<std::string> kept(toks.begin(), toks.end());
        heads.push_back(text::join(kept, " "));
    }
    return text::join(heads, "; ");
}

}  // namespace mars::gateway

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mars/gateway.hpp"
#include "mars/model.hpp"
#include "mars/taxonomy.hpp"

namespace mars::gateway {

struct Lexicon {
    std::set<std::string> positive;  // casefolded
    std::set<std::string> negative;
};

/// Word lists and a bilingual dictionary driving the mock.
struct MockData {
    std::map<LanguageCode, Lexicon> lexicons;
    /// (from, to) -> casefolded word -> translation.
    std::map<std::pair<LanguageCode, LanguageCode>, std::map<std::string, std::string>> dictionary;

    /// `lexicon.json`: {"EN": {"positive": [...], "negative": [...]}, ...}
    /// `dictionary.json`: [{"EN": "great", "ES": "gran", ...}, ...]
    static MockData load(const std::filesystem::path& dir);
    void add_lexicon(LanguageCode lang, const std::vector<std::string>& positive,
                     const std::vector<std::string>& negative);
    /// Adds all language pairs among the entries of one dictionary row.
    void add_row(const std::map<LanguageCode, std::string>& row);
};

struct MockOptions {
    std::size_t max_context_tokens = 4096;
    std::chrono::microseconds call_latency{0};
    std::chrono::microseconds prompt_latency{0};
    std::chrono::nanoseconds token_latency{0};
    bool single_flight = false;
};

/// Deterministic rule-based backend. The phase of each prompt is recognised by
/// its template marker; outputs depend only on the prompt text.
///
///   aspect_id  L3 names whose keywords occur in the review, by first occurrence
///   sentiment  lexicon vote over the segments mentioning the aspect
///   verbatim   the segments mentioning the aspect, one per line
///   translate  word-by-word dictionary lookup, unknown words kept
///   summarise  head tokens of every input line, within word_count
class MockBackend final : public GenerationBackend {
public:
    MockBackend(PromptSet prompts, Taxonomy taxonomy, MockData data, MockOptions options = {});

    std::vector<std::string> generate(const std::vector<std::string>& prompts, const GenParams& params) override;
    std::size_t max_context_tokens() const override { return options_.max_context_tokens; }
    bool single_flight() const override { return options_.single_flight; }

    std::string respond(const std::string& prompt) const;

    std::size_t calls() const { return calls_.load(); }
    std::size_t prompts_seen() const { return prompts_seen_.load(); }
    void reset_counters();

private:
    std::string aspects(const Vars& v) const;
    std::string sentiment(const Vars& v) const;
    std::string verbatims(const Vars& v) const;
    std::string translate(const Vars& v) const;
    std::string summarise(const Vars& v) const;

    std::vector<std::string> keywords_of(const std::string& aspect) const;
    std::vector<std::string> mentioning(const std::string& context, LanguageCode lang,
                                        const std::vector<std::string>& keywords) const;

    PromptSet prompts_;
    Taxonomy taxonomy_;
    MockData data_;
    MockOptions options_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> prompts_seen_{0};
};

/// Lowercased language name ("spanish") or code ("ES") to a code.
LanguageCode language_from_name(std::string_view name);

/// Position of `word` in `folded` at word boundaries, or npos. Both sides
/// must already be casefolded.
std::size_t find_word(std::string_view folded, std::string_view word, std::size_t from = 0);

}  // namespace mars::gateway

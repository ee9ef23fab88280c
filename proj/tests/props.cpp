#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "mars/evaluation.hpp"
#include "mars/segmenter.hpp"
#include "mars/summariser.hpp"
#include "mars/text.hpp"
#include "properties.hpp"
#include "support.hpp"

namespace mars::props {

namespace {

struct Vocab {
    std::vector<std::string> words;
    std::vector<std::string> connectors;
};

const Vocab& vocab_for(LanguageCode l) {
    static const std::map<LanguageCode, Vocab> v = {
        {LanguageCode::EN, {{"great", "battery", "screen", "butter", "andante", "slow", "delivery", "the", "room",
                             "isn't", "because-ish", "staff", "but's"},
                            {"but", "and", "because", "But", "AND"}}},
        {LanguageCode::ES, {{"batería", "pantalla", "pero-no", "yate", "muy", "buena", "envío", "lento", "año",
                             "habitación", "personal"},
                            {"pero", "y", "porque", "Pero"}}},
        {LanguageCode::FR, {{"batterie", "écran", "maison", "mais-oui", "très", "bonne", "livraison", "lente",
                             "l'hôtel", "chambre", "parcelle", "été"},
                            {"mais", "et", "parce que", "Mais", "parce  que"}}},
        {LanguageCode::DE, {{"Akku", "Bildschirm", "aberwitzig", "sehr", "gut", "Lieferung", "langsam", "Straße",
                             "Zimmer", "Personal", "weiler", "Hund"},
                            {"aber", "und", "weil", "Aber"}}},
        {LanguageCode::IT, {{"batteria", "schermo", "mare", "molto", "buona", "consegna", "lenta", "città", "perchéno",
                             "camera", "personale", "e-mail"},
                            {"ma", "e", "perché", "Ma", "E"}}},
    };
    return v.at(l);
}

const std::vector<std::string> kPunct{".", "!", "?", ",", ";", "...", "&", "¿", "¡", " ,", ",,", ". ."};

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& xs) { return xs[rng() % xs.size()]; }

std::vector<std::string> delimiter_pieces(LanguageCode lang) {
    std::vector<std::string> out;
    const auto& r = segmenter::rules_for(lang);
    for (const auto* list : {&r.sentence_delimiters, &r.phrase_delimiters}) {
        for (const auto& d : *list) {
            for (auto w : text::whitespace_tokens(d.text)) out.push_back(text::casefold(w));
        }
    }
    return out;
}

// True when `piece` (no whitespace) is a concatenation of delimiter pieces or
// runs of '.'.
bool made_of_delimiters(const std::string& piece, const std::vector<std::string>& parts) {
    const std::string f = text::casefold(piece);
    std::vector<bool> ok(f.size() + 1, false);
    ok[0] = true;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!ok[i]) continue;
        if (f[i] == '.') ok[i + 1] = true;
        for (const auto& p : parts) {
            if (f.compare(i, p.size(), p) == 0) ok[i + p.size()] = true;
        }
    }
    return ok[f.size()];
}

}  // namespace

Review random_review(std::mt19937_64& rng, int index) {
    const LanguageCode lang = kAllLanguages[rng() % kAllLanguages.size()];
    const auto& v = vocab_for(lang);
    std::string text;
    const int n = 1 + static_cast<int>(rng() % 18);
    for (int i = 0; i < n; ++i) {
        const auto roll = rng() % 10;
        std::string tok;
        if (roll < 6) tok = pick(rng, v.words);
        else if (roll < 8) tok = pick(rng, v.connectors);
        else tok = pick(rng, kPunct);
        if (!text.empty()) {
            const auto sep = rng() % 6;
            text += sep == 0 ? "" : sep == 1 ? "  " : sep == 2 ? "\t" : " ";
        }
        text += tok;
    }
    if (text::trim(text).empty() || text::word_count(text) == 0) text += " " + vocab_for(lang).words[0];
    return Review::make("r" + std::to_string(index), "e", lang, text);
}

std::string random_tokens(std::mt19937_64& rng, int min_len, int max_len, int vocab) {
    const int n = min_len + static_cast<int>(rng() % static_cast<std::uint64_t>(max_len - min_len + 1));
    std::string s;
    for (int i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += static_cast<char>('a' + rng() % static_cast<std::uint64_t>(vocab));
    }
    return s;
}

std::vector<std::string> check_segmenter(std::mt19937_64& rng, int n) {
    std::vector<std::string> bad;
    for (int i = 0; i < n; ++i) {
        const Review r = random_review(rng, i);
        const auto parts = delimiter_pieces(r.language);
        const auto segs = segmenter::segment(r);
        auto fail = [&](const std::string& why) { bad.push_back(std::string(to_string(r.language)) + " \"" + r.text + "\": " + why); };

        // spans index the text, strictly increasing, gaps are delimiters + whitespace
        std::size_t cursor = 0;
        std::string rebuilt;
        for (const auto& s : segs) {
            if (s.char_span.start < cursor || s.char_span.end <= s.char_span.start) {
                fail("non-monotone span");
                break;
            }
            if (r.text.substr(s.char_span.start, s.char_span.end - s.char_span.start) != s.text) fail("span text mismatch");
            const std::string gap = r.text.substr(cursor, s.char_span.start - cursor);
            for (auto piece : text::whitespace_tokens(gap)) {
                if (!made_of_delimiters(std::string(piece), parts)) fail("gap \"" + gap + "\" is not delimiters");
            }
            rebuilt += gap + s.text;
            cursor = s.char_span.end;
        }
        const std::string tail = r.text.substr(std::min(cursor, r.text.size()));
        for (auto piece : text::whitespace_tokens(tail)) {
            if (!made_of_delimiters(std::string(piece), parts)) fail("tail \"" + tail + "\" is not delimiters");
        }
        rebuilt += tail;
        if (rebuilt != r.text) fail("reconstruction differs");

        // minimality and composition
        std::vector<std::string> composed;
        for (const auto& sentence : segmenter::split_sentences(r)) {
            const auto phrases = segmenter::split_phrases(sentence);
            if (text::word_count(sentence.text) >= 2) {
                for (const auto& p : phrases) {
                    if (text::word_count(p.text) < 2) fail("phrase \"" + p.text + "\" below 2 words");
                }
            } else if (phrases.size() != 1 || phrases[0].text != sentence.text) {
                fail("short sentence \"" + sentence.text + "\" was split");
            }
            for (const auto& p : phrases) composed.push_back(p.text);
        }
        std::vector<std::string> got;
        for (const auto& s : segs) got.push_back(s.text);
        if (got != composed) fail("segment != split_phrases . split_sentences");
        if (bad.size() > 20) break;
    }
    return bad;
}

std::size_t check_batching(std::mt19937_64& rng, std::size_t batch, std::size_t count) {
    auto mock = test::demo_mock();
    const auto set = gateway::PromptSet::builtin();
    std::vector<std::string> prompts;
    for (std::size_t i = 0; i < count; ++i) {
        const auto r = random_review(rng, static_cast<int>(i));
        const std::string lang(language_name(r.language));
        if (i % 2 == 0) {
            prompts.push_back(set.get(gateway::TemplateName::aspect_id).render({{"language", lang}, {"context", r.text}}));
        } else {
            prompts.push_back(set.get(gateway::TemplateName::sentiment)
                                  .render({{"aspect", "battery life"}, {"language", lang}, {"context", r.text}}));
        }
    }
    std::vector<std::string> serial;
    for (const auto& p : prompts) serial.push_back(mock.respond(p));

    gateway::Dispatcher d(mock, {batch, std::chrono::microseconds(300), 3});
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    // Whole list through dispatch_batched.
    std::size_t mismatches = 0;
    const auto all = gateway::dispatch_batched(prompts, {}, d);
    for (std::size_t i = 0; i < count; ++i) mismatches += all[i] != serial[i];

    // Permuted submissions from four threads, each result checked against its tag.
    std::mutex m;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            std::vector<std::pair<std::size_t, std::future<std::string>>> futs;
            for (std::size_t k = t; k < count; k += 4) futs.emplace_back(order[k], d.submit(prompts[order[k]], {}));
            std::size_t local = 0;
            for (auto& [idx, f] : futs) local += f.get() != serial[idx];
            std::lock_guard lock(m);
            mismatches += local;
        });
    }
    for (auto& th : threads) th.join();
    if (d.stats().largest_batch > batch) ++mismatches;
    return mismatches;
}

namespace {

// Records the input-block size of every summarise prompt it forwards.
class Instrumented final : public gateway::GenerationBackend {
public:
    Instrumented(gateway::GenerationBackend& inner, std::size_t budget) : inner_(inner), budget_(budget) {}

    std::vector<std::string> generate(const std::vector<std::string>& prompts, const gateway::GenParams& p) override {
        for (const auto& prompt : prompts) {
            const auto vars = set_.get(gateway::TemplateName::summarise).match(prompt);
            if (!vars) {
                ++unmatched;
                continue;
            }
            const auto n = text::whitespace_token_count(vars->at("percent_contribution"));
            max_seen = std::max(max_seen, n);
            if (n > budget_) ++over_budget;
        }
        calls += 1;
        return inner_.generate(prompts, p);
    }
    std::size_t max_context_tokens() const override { return inner_.max_context_tokens(); }

    std::size_t calls = 0;
    std::size_t unmatched = 0;
    std::size_t over_budget = 0;
    std::size_t max_seen = 0;

private:
    gateway::GenerationBackend& inner_;
    std::size_t budget_;
    gateway::PromptSet set_ = gateway::PromptSet::builtin();
};

// Independent greedy chunking oracle.
std::vector<std::vector<std::string>> greedy_chunks(const std::vector<std::string>& xs, std::size_t budget) {
    std::vector<std::vector<std::string>> out;
    std::size_t used = 0;
    for (const auto& x : xs) {
        const auto n = text::whitespace_token_count(x);
        if (out.empty() || used + n > budget) {
            out.emplace_back();
            used = 0;
        }
        out.back().push_back(x);
        used += n;
    }
    return out;
}

}  // namespace

RecSummReport check_rec_summ(std::mt19937_64& rng, std::size_t pools, const std::vector<std::size_t>& budgets) {
    RecSummReport rep;
    auto mock = test::demo_mock();
    const auto set = gateway::PromptSet::builtin();
    for (std::size_t p = 0; p < pools; ++p) {
        const std::size_t budget = budgets[p % budgets.size()];
        const std::size_t size = 1 + rng() % 80;
        // Some pools keep every element >= budget / word_count tokens so a chunk
        // never holds more lines than the mock can echo a marker for.
        const bool marker_pool = p % 2 == 0;
        const std::size_t lo = marker_pool ? (budget + 9) / 10 : 1;
        const std::size_t hi = std::max(lo, std::min<std::size_t>(budget, 60));
        std::vector<std::string> xs;
        std::size_t total = 0;
        for (std::size_t i = 0; i < size; ++i) {
            const std::size_t len = lo + rng() % (hi - lo + 1);
            std::string v = "m" + std::to_string(p) + "x" + std::to_string(i);
            for (std::size_t w = 1; w < len; ++w) v += " w" + std::to_string(rng() % 5);
            total += len;
            xs.push_back(v);
        }

        Instrumented probe(mock, budget);
        gateway::Gateway g(probe);
        summariser::RecSummOptions opt;
        opt.context_length = budget;
        summariser::RecSummStats st;
        std::string out;
        auto fail = [&](const std::string& why) {
            rep.violations.push_back("pool " + std::to_string(p) + " (|X|=" + std::to_string(size) +
                                     ", l=" + std::to_string(budget) + "): " + why);
        };
        try {
            out = summariser::rec_summ(xs, g, set, opt, &st);
        } catch (const std::exception& e) {
            fail(e.what());
            continue;
        }
        ++rep.pools;
        rep.calls += probe.calls;
        if (probe.over_budget) fail("input above budget, max " + std::to_string(probe.max_seen));
        if (probe.unmatched) fail("non-summarise prompt");
        if (st.calls != probe.calls) fail("stats.calls != backend calls");
        if (out.empty()) fail("empty summary");
        if (text::whitespace_token_count(out) > opt.word_count) fail("summary above word_count");

        if (total <= budget) {
            if (probe.calls != 1) fail("fits but made " + std::to_string(probe.calls) + " calls");
            continue;
        }
        ++rep.recursive_pools;
        const auto chunks = greedy_chunks(xs, budget);
        // Level 1 may keep the element count; after it each chunk holds at
        // least budget / word_count summaries.
        const double b = static_cast<double>(budget / opt.word_count);
        const auto bound = 2 + static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(chunks.size())) / std::log(b)));
        if (st.depth > bound) fail("depth " + std::to_string(st.depth) + " above " + std::to_string(bound));

        if (marker_pool && chunks.size() * opt.word_count <= budget) {
            for (const auto& c : chunks) {
                const auto marker = std::string(text::whitespace_tokens(c.front()).front());
                if (out.find(marker) == std::string::npos) fail("marker " + marker + " lost");
            }
        }
        if (marker_pool) {
            // every element's marker reaches its leaf summary
            for (const auto& c : chunks) {
                const auto leaf = mock.respond(summariser::summarise_prompt(set, c, opt));
                for (const auto& x : c) {
                    const auto marker = std::string(text::whitespace_tokens(x).front());
                    if (leaf.find(marker) == std::string::npos) fail("leaf lost " + marker);
                }
            }
        }
        if (rep.violations.size() > 20) break;
    }
    return rep;
}

WeightedReport weighted_monte_carlo(int trials) {
    std::map<std::string, Vector> table{{"great price", {1.0, 0.00, 0.0}},  {"great price!", {1.0, 0.05, 0.0}},
                                        {"Great price", {1.0, 0.00, 0.05}}, {"great price.", {1.0, 0.03, 0.03}},
                                        {"great prices", {1.0, 0.06, 0.0}}, {"rude staff", {0.0, 0.0, 1.0}}};
    TableEmbeddingProvider emb(table);
    summariser::VerbatimPool pool;
    pool.aspect = "prices";
    int i = 0;
    for (const auto& [text, v] : table) pool.verbatims.push_back({text, LanguageCode::EN, "r" + std::to_string(i++), "x"});

    WeightedReport r;
    int k1 = 0, k2 = 0;
    for (int t = 0; t < trials; ++t) {
        const auto seed = static_cast<std::uint64_t>(t);
        const auto one = summariser::select(pool, {SelectionKind::weighted, 1, seed}, emb);
        k1 += one.at(0).text != "rude staff";
        const auto two = summariser::select(pool, {SelectionKind::weighted, 2, seed}, emb);
        k2 += std::any_of(two.begin(), two.end(), [](const auto& v) { return v.text != "rude staff"; });
    }
    r.k1_share = k1 / static_cast<double>(trials);
    r.k2_inclusion = k2 / static_cast<double>(trials);
    return r;
}

double max_unrelated_embed_score(int pairs) {
    HashEmbeddingProvider h(128, 1234);
    std::mt19937_64 rng(99);
    auto word = [&](char lo, char hi) {
        std::string w;
        const int n = 4 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) w += static_cast<char>(lo + rng() % static_cast<std::uint64_t>(hi - lo + 1));
        return w;
    };
    double worst = 0.0;
    for (int p = 0; p < pairs; ++p) {
        std::string a, b;
        const int n = 3 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            a += (i ? " " : "") + word('a', 'm');
            b += (i ? " " : "") + word('n', 'z');
        }
        worst = std::max(worst, evaluation::embed_score(a, b, h));
    }
    return worst;
}

}  // namespace mars::props

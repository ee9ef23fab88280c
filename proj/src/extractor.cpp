#include "mars/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>

#include "mars/corpus.hpp"
#include "mars/kernels.hpp"
#include "mars/segmenter.hpp"
#include "mars/text.hpp"

namespace mars::extractor {

using gateway::TemplateName;

namespace {

// Leading "-", "*", "•", "1.", "2)" and surrounding quotes.
std::string clean_item(std::string_view s) {
    s = text::trim(s);
    for (std::string_view bullet : {"- ", "* ", "• ", "•"}) {
        if (s.substr(0, bullet.size()) == bullet) {
            s = text::trim(s.substr(bullet.size()));
            break;
        }
    }
    std::size_t digits = 0;
    while (digits < s.size() && s[digits] >= '0' && s[digits] <= '9') ++digits;
    if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')') &&
        (digits + 1 == s.size() || s[digits + 1] == ' ')) {
        s = text::trim(s.substr(digits + 1));
    }
    auto strip_pair = [&](std::string_view open, std::string_view close) {
        if (s.size() >= open.size() + close.size() && s.substr(0, open.size()) == open &&
            s.substr(s.size() - close.size()) == close) {
            s = text::trim(s.substr(open.size(), s.size() - open.size() - close.size()));
        }
    };
    strip_pair("\"", "\"");
    strip_pair("'", "'");
    strip_pair("“", "”");
    strip_pair("«", "»");
    return std::string(s);
}

bool has_alnum(std::string_view s) {
    for (std::size_t i = 0; i < s.size();) {
        const auto d = text::decode_utf8(s, i);
        if (text::is_alnum(d.cp)) return true;
        i += d.length;
    }
    return false;
}

}  // namespace

std::vector<std::string> parse_aspect_list(std::string_view response) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& line : text::split_lines(response)) {
        std::string_view rest = line;
        while (true) {
            const auto comma = rest.find(',');
            std::string item = clean_item(rest.substr(0, comma));
            while (!item.empty() && item.back() == '.') item.pop_back();
            item = clean_item(item);
            if (has_alnum(item) && seen.insert(text::normalise_name(item)).second) out.push_back(item);
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
    }
    return out;
}

std::optional<Sentiment> parse_sentiment_response(std::string_view response) {
    std::string s = clean_item(response);
    while (!s.empty() && (s.back() == '.' || s.back() == '!')) s.pop_back();
    try {
        return parse_sentiment(s);
    } catch (const InputError&) {
    }
    const auto words = text::word_tokens(s);
    if (!words.empty()) {
        try {
            return parse_sentiment(words.front());
        } catch (const InputError&) {
        }
    }
    return std::nullopt;
}

std::vector<std::string> parse_lines(std::string_view response) {
    std::vector<std::string> out;
    for (const auto& line : text::split_lines(response)) {
        std::string item = clean_item(line);
        if (!item.empty()) out.push_back(std::move(item));
    }
    return out;
}

std::vector<Insight> merge_insights(std::vector<Insight> insights) {
    std::vector<Insight> out;
    std::map<std::pair<std::string, std::string>, std::size_t> at;  // (review, normalised L3)
    for (auto& in : insights) {
        const auto key = std::make_pair(in.review_id, text::normalise_name(in.l3_aspect));
        const auto it = at.find(key);
        if (it == at.end()) {
            at.emplace(key, out.size());
            out.push_back(std::move(in));
            continue;
        }
        Insight& m = out[it->second];
        m.sentiment = combine(m.sentiment, in.sentiment);
        if (!m.l4_aspect) m.l4_aspect = in.l4_aspect;
        for (std::size_t i = 0; i < in.source_verbatims.size(); ++i) {
            const bool dup = std::find(m.source_verbatims.begin(), m.source_verbatims.end(),
                                       in.source_verbatims[i]) != m.source_verbatims.end();
            if (dup) continue;
            m.source_verbatims.push_back(in.source_verbatims[i]);
            m.translated_verbatims.push_back(in.translated_verbatims[i]);
        }
    }
    return out;
}

Extractor::Extractor(gateway::Gateway& gateway, const gateway::PromptSet& prompts, const Taxonomy& taxonomy,
                     EmbeddingProvider& embeddings, const PipelineConfig& config,
                     matcher::NewAspectRegistry* registry)
    : gateway_(gateway), prompts_(prompts), taxonomy_(taxonomy), embeddings_(embeddings), config_(config),
      registry_(registry) {
    config_.validate();
}

std::string Extractor::ask(ExtractionTrace& trace, TemplateName phase, const gateway::Vars& vars) const {
    std::string prompt = prompts_.get(phase).render(vars);
    trace.phase_prompts.push_back({phase, prompt, {}});
    ++trace.prompt_count;
    std::string response = gateway_.complete(prompt);
    trace.phase_prompts.back().response = response;
    return response;
}

std::vector<std::string> Extractor::ground(const Review& review, const std::vector<std::string>& verbatims,
                                           ExtractionTrace& trace) const {
    const auto segments = segmenter::segment(review);
    std::vector<std::string> out;
    for (const auto& v : verbatims) {
        bool grounded = review.text.find(v) != std::string::npos;
        for (std::size_t i = 0; !grounded && i < segments.size(); ++i) {
            grounded = text::jaccard(v, segments[i].text) >= config_.grounding_jaccard;
        }
        if (grounded) {
            if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
        } else {
            trace.warnings.push_back("hallucinated verbatim dropped: \"" + v + "\"");
        }
    }
    return out;
}

Insight Extractor::to_insight(const Review& review, const AspectRecord& rec) const {
    const auto& m = *rec.match;
    Insight in;
    in.entity_id = review.entity_id;
    in.review_id = review.review_id;
    in.sentiment = rec.sentiment;
    switch (m.kind) {
        case matcher::OutcomeKind::existing_l3:
            in.l3_aspect = m.resolved_aspect;
            break;
        case matcher::OutcomeKind::new_l4:
            in.l3_aspect = m.parent_l3;
            in.l4_aspect = m.resolved_aspect;
            break;
        case matcher::OutcomeKind::new_aspect:
            in.l3_aspect = m.resolved_aspect;
            in.new_aspect = true;
            break;
    }
    if (!in.new_aspect) {
        if (auto up = taxonomy_.ancestors(in.l3_aspect)) {
            in.l1_aspect = up->first;
            in.l2_aspect = up->second;
        }
    }
    for (const auto& s : rec.source) in.source_verbatims.push_back({s, review.language});
    for (const auto& t : rec.translated) in.translated_verbatims.push_back({t, config_.target_language});
    return in;
}

ExtractionResult Extractor::extract(const Review& review) const {
    ExtractionResult result;
    ExtractionTrace& trace = result.trace;
    trace.review_id = review.review_id;
    const std::string language(language_name(review.language));
    const std::string target(language_name(config_.target_language));

    try {
        const std::string listed =
            ask(trace, TemplateName::aspect_id, {{"language", language}, {"context", review.text}});
        trace.aspects = parse_aspect_list(listed);
        if (trace.aspects.empty() && !text::trim(listed).empty()) {
            trace.warnings.push_back("unparseable aspect list: \"" + listed + "\"");
        }

        for (const auto& aspect : trace.aspects) {
            AspectRecord rec;
            rec.generated = aspect;

            const std::string said = ask(trace, TemplateName::sentiment,
                                         {{"aspect", aspect}, {"language", language}, {"context", review.text}});
            const auto polarity = parse_sentiment_response(said);
            if (!polarity) {
                trace.warnings.push_back("unparseable sentiment for \"" + aspect + "\": \"" + said +
                                         "\"; review abandoned");
                trace.records.push_back(std::move(rec));
                result.insights.clear();
                return result;
            }
            rec.sentiment = *polarity;

            const std::string quoted = ask(trace, TemplateName::verbatim,
                                           {{"aspect", aspect},
                                            {"sentiment", std::string(to_string(rec.sentiment))},
                                            {"language", language},
                                            {"context", review.text}});
            rec.source = ground(review, parse_lines(quoted), trace);

            const std::string translated = ask(trace, TemplateName::translate,
                                               {{"language", language},
                                                {"target_language", target},
                                                {"verbatims", text::join(rec.source, "\n")},
                                                {"context", review.text}});
            rec.translated = parse_lines(translated);

            if (rec.source.empty()) {
                trace.warnings.push_back("no grounded verbatims for \"" + aspect + "\"; aspect dropped");
            } else if (rec.translated.size() != rec.source.size()) {
                trace.warnings.push_back("translation line count " + std::to_string(rec.translated.size()) +
                                         " != " + std::to_string(rec.source.size()) + " for \"" + aspect +
                                         "\"; aspect dropped");
            } else {
                rec.match = matcher::standardise(aspect, text::join(rec.source, " "), taxonomy_, embeddings_,
                                                 config_.thresholds, registry_,
                                                 {review.entity_id, review.review_id});
                rec.kept = true;
                result.insights.push_back(to_insight(review, rec));
            }
            trace.records.push_back(std::move(rec));
        }
    } catch (const BackendError& e) {
        trace.failure = e.what();
        result.insights.clear();
        return result;
    }

    result.insights = merge_insights(std::move(result.insights));
    trace.completed = true;
    return result;
}

int clr_percent(double atl_r, double atl_v) {
    if (!(atl_r > 0.0)) throw std::invalid_argument("clr_percent: ATL/R must be positive");
    return static_cast<int>(std::lround(100.0 * (1.0 - atl_v / atl_r)));
}

ClrStats compute_clr(std::string domain, std::span<const Review> reviews, std::span<const Insight> insights) {
    if (reviews.empty()) throw InputError("compute_clr: empty corpus");
    const auto t = kernels::token_totals(reviews, insights);
    ClrStats s;
    s.domain = std::move(domain);
    s.n_reviews = t.reviews;
    s.n_verbatims = t.verbatims;
    s.avg_tokens_per_review = static_cast<double>(t.review_tokens) / static_cast<double>(t.reviews);
    s.avg_tokens_per_verbatim =
        t.verbatims == 0 ? 0.0 : static_cast<double>(t.verbatim_tokens) / static_cast<double>(t.verbatims);
    s.clr_percent = s.avg_tokens_per_review > 0.0 ? clr_percent(s.avg_tokens_per_review, s.avg_tokens_per_verbatim)
                                                  : 0;
    return s;
}

std::vector<Insight> CorpusExtraction::insights() const {
    std::vector<Insight> out;
    for (const auto& r : results) out.insert(out.end(), r.insights.begin(), r.insights.end());
    return out;
}

CorpusExtraction extract_corpus(std::span<const Review> reviews, const Extractor& extractor, std::string domain) {
    if (reviews.empty()) throw InputError("extract_corpus: empty corpus");
    CorpusExtraction out;
    out.results.resize(reviews.size());
    kernels::parallel_for(reviews.size(), [&](std::size_t i) { out.results[i] = extractor.extract(reviews[i]); });

    for (const auto& r : out.results) {
        for (const auto& w : r.trace.warnings) out.warnings.push_back(r.trace.review_id + ": " + w);
        if (r.trace.failure) {
            throw BackendError("review " + r.trace.review_id + ": " + *r.trace.failure);
        }
    }
    const auto all = out.insights();
    out.clr = compute_clr(std::move(domain), reviews, all);
    return out;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

ExtractionScores score_extraction(std::span<const Insight> predicted, std::span<const Insight> gold,
                                  EmbeddingProvider& embeddings, const ScoringOptions& options) {
    if (gold.empty()) throw InputError("score_extraction: empty gold set, recall undefined");
    ExtractionScores s;
    s.predicted = predicted.size();
    s.gold = gold.size();

    auto overlaps = [&](const Insight& p, const Insight& g) {
        for (const auto& pv : p.source_verbatims) {
            for (const auto& gv : g.source_verbatims) {
                if (text::jaccard(pv.text, gv.text) >= options.verbatim_jaccard) return true;
            }
        }
        return false;
    };
    auto joined = [](const std::vector<Verbatim>& vs) {
        std::vector<std::string> parts;
        for (const auto& v : vs) parts.push_back(v.text);
        return text::join(parts, " ");
    };

    std::vector<bool> used(gold.size(), false);
    std::size_t translated_ok = 0;
    for (const auto& p : predicted) {
        for (std::size_t j = 0; j < gold.size(); ++j) {
            const auto& g = gold[j];
            if (used[j] || p.review_id != g.review_id || p.sentiment != g.sentiment ||
                text::normalise_name(p.l3_aspect) != text::normalise_name(g.l3_aspect) || !overlaps(p, g)) {
                continue;
            }
            used[j] = true;
            ++s.true_positives;
            const std::string pt = joined(p.translated_verbatims), gt = joined(g.translated_verbatims);
            if (!pt.empty() && !gt.empty()) {
                if (pt == gt) {
                    ++translated_ok;
                } else {
                    const auto v = checked_embed(embeddings, {pt, gt});
                    if (kernels::cosine(v[0], v[1]) >= options.translation_cosine) ++translated_ok;
                }
            }
            break;
        }
    }
    const double tp = static_cast<double>(s.true_positives);
    s.precision = predicted.empty() ? 0.0 : tp / static_cast<double>(predicted.size());
    s.recall = tp / static_cast<double>(gold.size());
    s.f1 = f1_score(s.precision, s.recall);
    s.translation_accuracy = s.true_positives == 0 ? 0.0 : static_cast<double>(translated_ok) / tp;
    return s;
}

namespace {

std::string entity_file_name(const std::string& entity) {
    std::string out;
    for (char c : entity) {
        const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '_' || c == '.';
        out.push_back(safe ? c : '_');
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out + ".jsonl";
}

json read_index(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return json::object();
    std::ifstream in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace

void write_insight_store(const std::filesystem::path& dir, std::span<const Review> reviews,
                         std::span<const Insight> insights) {
    std::filesystem::create_directories(dir / "insights");
    const auto index_path = dir / "index.json";
    json index = read_index(index_path);

    std::map<std::string, std::set<std::string>> review_ids;
    for (const auto& r : reviews) review_ids[r.entity_id].insert(r.review_id);
    std::map<std::string, std::vector<const Insight*>> by_entity;
    for (const auto& in : insights) by_entity[in.entity_id].push_back(&in);

    for (const auto& [entity, ids] : review_ids) {
        json& e = index[entity];
        if (!e.is_object()) e = json{{"file", "insights/" + entity_file_name(entity)},
                                     {"review_ids", json::array()}, {"offsets", json::array()}};
        std::set<std::string> all = e["review_ids"].get<std::set<std::string>>();
        all.insert(ids.begin(), ids.end());
        e["review_ids"] = all;
        e["reviews"] = all.size();

        const auto path = dir / e["file"].get<std::string>();
        std::ofstream out(path, std::ios::app | std::ios::binary);
        if (!out) throw InputError("cannot write " + path.string());
        out.seekp(0, std::ios::end);
        for (const Insight* in : by_entity[entity]) {
            e["offsets"].push_back(static_cast<std::size_t>(out.tellp()));
            out << to_json(*in).dump() << '\n';
        }
    }
    for (const auto& [entity, list] : by_entity) {
        if (!review_ids.count(entity)) throw InputError("insight for entity " + entity + " without its reviews");
    }
    std::ofstream out(index_path);
    out << index.dump(2) << '\n';
}

std::map<std::string, EntityInsights> read_insight_store(const std::filesystem::path& dir) {
    const auto index_path = dir / "index.json";
    if (!std::filesystem::exists(index_path)) throw InputError("no insight store at " + dir.string());
    const json index = read_index(index_path);
    std::map<std::string, EntityInsights> out;
    for (const auto& [entity, e] : index.items()) {
        EntityInsights ei;
        ei.review_count = e.at("reviews").get<std::size_t>();
        std::ifstream in(dir / e.at("file").get<std::string>());
        if (!in) throw InputError("missing insight file for entity " + entity);
        std::map<std::string, std::size_t> at;  // insight id -> position; later lines win
        for (const auto& row : read_jsonl(in)) {
            Insight ins = insight_from_json(row);
            const auto it = at.find(ins.id());
            if (it != at.end()) {
                ei.insights[it->second] = std::move(ins);
            } else {
                at.emplace(ins.id(), ei.insights.size());
                ei.insights.push_back(std::move(ins));
            }
        }
        out.emplace(entity, std::move(ei));
    }
    return out;
}

}  // namespace mars::extractor

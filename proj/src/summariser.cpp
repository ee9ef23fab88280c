#include "mars/summariser.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mars/kernels.hpp"

namespace mars::summariser {

int mention_percent(std::size_t mentions, std::size_t total_reviews) {
    if (total_reviews == 0) throw std::invalid_argument("mention_percent: no reviews");
    if (mentions > total_reviews) throw std::invalid_argument("mention_percent: mentions exceed reviews");
    return static_cast<int>(std::lround(100.0 * static_cast<double>(mentions) / static_cast<double>(total_reviews)));
}

std::vector<VerbatimPool> build_pools(const std::string& entity_id, std::span<const Insight> insights,
                                      std::size_t total_reviews) {
    std::map<std::string, VerbatimPool> pools;  // normalised name -> pool
    std::map<std::string, std::set<std::string>> mentioned;
    std::set<std::string> reviews;
    for (const auto& in : insights) {
        if (in.entity_id != entity_id) continue;
        const std::string key = text::normalise_name(in.l3_aspect);
        auto& pool = pools[key];
        if (pool.aspect.empty()) {
            pool.aspect = in.l3_aspect;
            pool.entity_id = entity_id;
        }
        mentioned[key].insert(in.review_id);
        reviews.insert(in.review_id);
        for (const auto& v : in.translated_verbatims) {
            pool.verbatims.push_back({v.text, v.language, in.review_id, in.id(), in.sentiment});
        }
    }
    const std::size_t total = std::max(total_reviews, reviews.size());

    std::vector<VerbatimPool> out;
    for (auto& [key, pool] : pools) {
        pool.mentions = mentioned[key].size();
        pool.mention_percent = mention_percent(pool.mentions, total);
        out.push_back(std::move(pool));
    }
    std::stable_sort(out.begin(), out.end(), [](const VerbatimPool& a, const VerbatimPool& b) {
        if (a.mention_percent != b.mention_percent) return a.mention_percent > b.mention_percent;
        return a.aspect < b.aspect;
    });
    return out;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: zero bound");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace {

std::vector<PoolVerbatim> select_random(const VerbatimPool& pool, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(pool.verbatims.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<PoolVerbatim> out;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_below(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(pool.verbatims[idx[i]]);
    }
    return out;
}

std::vector<Vector> embed_pool(const VerbatimPool& pool, EmbeddingProvider& embeddings) {
    std::vector<std::string> texts;
    texts.reserve(pool.verbatims.size());
    for (const auto& v : pool.verbatims) texts.push_back(v.text);
    return checked_embed(embeddings, texts);
}

std::vector<PoolVerbatim> select_weighted(const VerbatimPool& pool, std::size_t k, EmbeddingProvider& embeddings,
                                          std::mt19937_64& rng) {
    const auto vectors = embed_pool(pool, embeddings);
    std::vector<std::vector<std::size_t>> clusters;  // first member is the leader
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        bool placed = false;
        for (auto& c : clusters) {
            if (kernels::cosine(vectors[c.front()], vectors[i]) >= kNearDuplicateCosine) {
                c.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) clusters.push_back({i});
    }

    std::vector<std::size_t> open(clusters.size());
    std::iota(open.begin(), open.end(), 0);
    std::vector<std::size_t> drawn;
    while (drawn.size() < k && !open.empty()) {
        std::size_t mass = 0;
        for (auto c : open) mass += clusters[c].size();
        double r = uniform_unit(rng) * static_cast<double>(mass);
        std::size_t pick = open.size() - 1;
        for (std::size_t i = 0; i < open.size(); ++i) {
            r -= static_cast<double>(clusters[open[i]].size());
            if (r < 0.0) {
                pick = i;
                break;
            }
        }
        drawn.push_back(open[pick]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::stable_sort(drawn.begin(), drawn.end(),
                     [&](std::size_t a, std::size_t b) { return clusters[a].size() > clusters[b].size(); });

    std::vector<PoolVerbatim> out;
    for (auto c : drawn) out.push_back(pool.verbatims[clusters[c].front()]);
    // Fewer clusters than k: fill with the remaining members, biggest clusters first.
    for (std::size_t c : drawn) {
        for (std::size_t m = 1; m < clusters[c].size() && out.size() < k; ++m) {
            out.push_back(pool.verbatims[clusters[c][m]]);
        }
    }
    return out;
}

std::vector<PoolVerbatim> select_centroid(const VerbatimPool& pool, std::size_t k, EmbeddingProvider& embeddings) {
    const auto vectors = embed_pool(pool, embeddings);
    Vector centre(vectors.front().size(), 0.0);
    for (const auto& v : vectors) {
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n == 0.0) continue;
        for (std::size_t d = 0; d < v.size(); ++d) centre[d] += v[d] / n;
    }
    std::vector<double> score(vectors.size(), 0.0);
    const bool degenerate = std::all_of(centre.begin(), centre.end(), [](double x) { return std::abs(x) < 1e-12; });
    if (!degenerate) {
        score = kernels::cosine_scores(centre, kernels::Matrix::from_rows(vectors));
    }
    std::vector<std::size_t> idx(vectors.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    std::vector<PoolVerbatim> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(pool.verbatims[idx[i]]);
    return out;
}

}  // namespace

std::vector<PoolVerbatim> select(const VerbatimPool& pool, const SelectionStrategy& strategy,
                                 EmbeddingProvider& embeddings) {
    if (pool.verbatims.empty()) throw std::invalid_argument("select: empty pool for " + pool.aspect);
    if (strategy.k < 1) throw std::invalid_argument("select: k must be >= 1");
    if (strategy.k >= pool.verbatims.size()) return pool.verbatims;
    std::mt19937_64 rng(strategy.seed);
    switch (strategy.kind) {
        case SelectionKind::random: return select_random(pool, strategy.k, rng);
        case SelectionKind::weighted: return select_weighted(pool, strategy.k, embeddings, rng);
        case SelectionKind::centroid: return select_centroid(pool, strategy.k, embeddings);
    }
    return select_random(pool, strategy.k, rng);
}

std::vector<std::vector<std::string>> chunk_elements(const std::vector<std::string>& elements, std::size_t budget,
                                                     const text::TokenCounter& counter) {
    std::vector<std::vector<std::string>> chunks;
    std::size_t used = 0;
    for (const auto& e : elements) {
        const std::size_t n = counter(e);
        if (n > budget) {
            throw ContentError("verbatim exceeds context budget (" + std::to_string(n) + " > " +
                               std::to_string(budget) + " tokens)");
        }
        if (chunks.empty() || used + n > budget) {
            chunks.emplace_back();
            used = 0;
        }
        chunks.back().push_back(e);
        used += n;
    }
    return chunks;
}

std::string summarise_prompt(const gateway::PromptSet& prompts, const std::vector<std::string>& elements,
                             const RecSummOptions& options) {
    return prompts.get(gateway::TemplateName::summarise)
        .render({{"word_count", std::to_string(options.word_count)},
                 {"aspect_count", std::to_string(options.aspect_count)},
                 {"sentiment", options.sentiment},
                 {"percent_contribution", text::join(elements, "\n")}});
}

namespace {

std::vector<std::string> sanitise(const std::vector<std::string>& elements) {
    std::vector<std::string> out;
    for (const auto& e : elements) {
        std::string s(e);
        std::replace(s.begin(), s.end(), '\n', ' ');
        std::replace(s.begin(), s.end(), '\r', ' ');
        const auto t = text::trim(s);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::size_t total_tokens(const std::vector<std::string>& elements, const text::TokenCounter& counter) {
    std::size_t n = 0;
    for (const auto& e : elements) n += counter(e);
    return n;
}

}  // namespace

std::string rec_summ(const std::vector<std::string>& elements, gateway::Gateway& gateway,
                     const gateway::PromptSet& prompts, const RecSummOptions& options, RecSummStats* stats) {
    RecSummStats local;
    RecSummStats& st = stats ? *stats : local;
    std::vector<std::string> x = sanitise(elements);
    if (x.empty()) return "";

    for (std::size_t depth = 1;; ++depth) {
        if (depth > options.max_depth) {
            throw ContentError("recursive summarisation exceeded depth " + std::to_string(options.max_depth));
        }
        st.depth = std::max(st.depth, depth);
        const std::size_t tokens = total_tokens(x, options.token_counter);
        if (tokens <= options.context_length) {
            st.max_input_tokens = std::max(st.max_input_tokens, tokens);
            ++st.calls;
            return gateway.complete(summarise_prompt(prompts, x, options));
        }
        const auto chunks = chunk_elements(x, options.context_length, options.token_counter);
        std::vector<std::string> batch;
        for (const auto& c : chunks) {
            st.max_input_tokens = std::max(st.max_input_tokens, total_tokens(c, options.token_counter));
            batch.push_back(summarise_prompt(prompts, c, options));
        }
        st.calls += batch.size();
        x = sanitise(gateway.complete_all(batch));
        if (x.empty()) return "";
    }
}

std::string percent_line(LanguageCode lang, int percent, const std::string& aspect, const std::string& summary) {
    const std::string p = std::to_string(percent);
    switch (lang) {
        case LanguageCode::EN: return p + "% of the reviews mention " + aspect + ": " + summary;
        case LanguageCode::ES: return "El " + p + "% de las reseñas menciona " + aspect + ": " + summary;
        case LanguageCode::FR: return p + "% des avis mentionnent " + aspect + " : " + summary;
        case LanguageCode::DE: return p + " % der Bewertungen erwähnen " + aspect + ": " + summary;
        case LanguageCode::IT: return "Il " + p + "% delle recensioni menziona " + aspect + ": " + summary;
    }
    return p + "% of the reviews mention " + aspect + ": " + summary;
}

namespace {

std::string dominant_sentiment(const VerbatimPool& pool) {
    std::size_t pos = 0, neg = 0;
    for (const auto& v : pool.verbatims) {
        pos += v.sentiment != Sentiment::negative ? 1 : 0;
        neg += v.sentiment != Sentiment::positive ? 1 : 0;
    }
    if (pos > neg) return "positive";
    if (neg > pos) return "negative";
    return "positive and negative";
}

std::vector<std::string> ids_of(const std::vector<PoolVerbatim>& vs) {
    std::set<std::string> ids;
    for (const auto& v : vs) ids.insert(v.insight_id);
    return {ids.begin(), ids.end()};
}

}  // namespace

SummaryBundle summarise_entity(const std::string& entity_id, std::span<const Insight> insights,
                               std::size_t total_reviews, gateway::Gateway& gateway,
                               const gateway::PromptSet& prompts, EmbeddingProvider& embeddings,
                               const PipelineConfig& config, std::vector<std::string>* warnings) {
    config.validate();
    std::vector<Insight> own;
    for (const auto& in : insights) {
        if (in.entity_id == entity_id) own.push_back(in);
    }
    if (own.empty()) throw InputError("no insights for entity " + entity_id);

    SummaryBundle bundle;
    bundle.entity_id = entity_id;
    bundle.target_language = config.target_language;

    const auto pools = build_pools(entity_id, own, total_reviews);
    std::vector<std::string> summaries(pools.size());
    std::vector<std::vector<std::string>> provenance(pools.size());
    kernels::parallel_for(pools.size(), [&](std::size_t i) {
        const auto& pool = pools[i];
        if (pool.verbatims.empty()) return;
        const SelectionStrategy strategy{config.selection_strategy, config.selection_pool_size,
                                         config.random_seed ^ text::fnv1a(entity_id + '\x1f' + pool.aspect)};
        const auto chosen = select(pool, strategy, embeddings);
        std::vector<std::string> texts;
        for (const auto& v : chosen) texts.push_back(v.text);
        RecSummOptions opt;
        opt.context_length = config.context_length;
        opt.word_count = config.words_per_aspect;
        opt.aspect_count = 1;
        opt.sentiment = dominant_sentiment(pool);
        summaries[i] = rec_summ(texts, gateway, prompts, opt);
        provenance[i] = ids_of(chosen);
    });

    std::map<std::string, std::string> summary_of;
    for (std::size_t i = 0; i < pools.size(); ++i) {
        bundle.aspect_stats[pools[i].aspect] = pools[i].mention_percent;
        if (pools[i].verbatims.empty() || summaries[i].empty()) {
            if (warnings) warnings->push_back(entity_id + ": aspect \"" + pools[i].aspect + "\" skipped, empty pool");
            continue;
        }
        bundle.aspect_summaries[pools[i].aspect] = summaries[i];
        bundle.provenance["aspect:" + pools[i].aspect] = provenance[i];
        summary_of[pools[i].aspect] = summaries[i];
    }

    std::set<std::string> overall_ids;
    auto overall = [&](const std::vector<VerbatimPool>& ranked, const std::string& sentiment) -> std::string {
        std::vector<std::string> lines;
        for (const auto& pool : ranked) {
            if (lines.size() == config.top_aspect_count) break;
            const auto it = summary_of.find(pool.aspect);
            if (it == summary_of.end()) continue;
            lines.push_back(percent_line(config.target_language, pool.mention_percent, pool.aspect, it->second));
            for (const auto& v : pool.verbatims) overall_ids.insert(v.insight_id);
        }
        if (lines.empty()) return "";
        RecSummOptions opt;
        opt.aspect_count = lines.size();
        opt.word_count = lines.size() * config.words_per_aspect;
        opt.sentiment = sentiment;
        return gateway.complete(summarise_prompt(prompts, lines, opt));
    };

    const std::size_t total = std::max(total_reviews, [&] {
        std::set<std::string> r;
        for (const auto& in : own) r.insert(in.review_id);
        return r.size();
    }());

    if (config.overall_mode == OverallMode::mixed) {
        bundle.overall_summary = overall(pools, "positive and negative");
    } else {
        std::vector<std::string> parts;
        for (Sentiment s : {Sentiment::positive, Sentiment::negative}) {
            std::vector<Insight> subset;
            for (const auto& in : own) {
                if (in.sentiment == s || in.sentiment == Sentiment::both) subset.push_back(in);
            }
            if (subset.empty()) continue;
            const std::string label(to_string(s));
            const std::string text = overall(build_pools(entity_id, subset, total), label);
            if (text.empty()) continue;
            bundle.overall_by_sentiment[label] = text;
            parts.push_back(text);
        }
        bundle.overall_summary = text::join(parts, "\n");
    }
    bundle.provenance["overall"] = {overall_ids.begin(), overall_ids.end()};
    return bundle;
}

}  // namespace mars::summariser

#include "mars/pipeline.hpp"

#include <fstream>

#include "mars/summariser.hpp"

namespace mars::pipeline {

ExtractReport extract_to_store(const config::AppConfig& cfg, const std::filesystem::path& corpus,
                               const std::filesystem::path& taxonomy_path, const std::filesystem::path& out_dir) {
    const auto taxonomy = load_valid_taxonomy(taxonomy_path);
    const auto reviews = load_corpus(corpus);
    if (reviews.empty()) throw InputError(corpus.string() + ": no reviews");
    config::Runtime rt(cfg, taxonomy);

    std::filesystem::create_directories(out_dir);
    matcher::NewAspectRegistry registry;
    extractor::Extractor ex(rt.gateway(), rt.prompts(), taxonomy, rt.embeddings(), cfg.pipeline, &registry);
    const auto result = extractor::extract_corpus(reviews, ex, corpus.stem().string());
    const auto insights = result.insights();
    extractor::write_insight_store(out_dir, reviews, insights);

    const auto& c = result.clr;
    std::ofstream(out_dir / "clr.json") << json{{"domain", c.domain},
                                                {"n_reviews", c.n_reviews},
                                                {"n_verbatims", c.n_verbatims},
                                                {"atl_r", c.avg_tokens_per_review},
                                                {"atl_v", c.avg_tokens_per_verbatim},
                                                {"clr_percent", c.clr_percent}}
                                               .dump(2)
                                        << '\n';
    std::ofstream audit(out_dir / "new_aspects.jsonl", std::ios::binary);
    for (const auto& e : registry.snapshot()) {
        audit << json{{"name", e.name},
                      {"entity_id", e.entity_id},
                      {"review_id", e.review_id},
                      {"nearest_l3", e.nearest_l3},
                      {"score_t", e.score_t},
                      {"score_v", e.score_v}}
                     .dump()
              << '\n';
    }
    return {reviews.size(), insights.size(), registry.size(), c, result.warnings};
}

std::vector<json> summarise_store(const config::AppConfig& cfg, const std::filesystem::path& store,
                                  const std::string& entity, const Taxonomy& taxonomy,
                                  std::vector<std::string>* warnings) {
    const auto entities = extractor::read_insight_store(store);
    if (!entity.empty() && !entities.count(entity)) throw InputError("entity " + entity + " not in " + store.string());
    config::Runtime rt(cfg, taxonomy);

    std::vector<json> rows;
    for (const auto& [id, ei] : entities) {
        if (!entity.empty() && id != entity) continue;
        if (ei.insights.empty()) {
            if (warnings) warnings->push_back("entity " + id + " has no insights; skipped");
            continue;
        }
        const auto bundle = summariser::summarise_entity(id, ei.insights, ei.review_count, rt.gateway(),
                                                         rt.prompts(), rt.embeddings(), cfg.pipeline, warnings);
        rows.push_back(to_json(bundle));
    }
    return rows;
}

}  // namespace mars::pipeline

#include "mars/matcher.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "mars/text.hpp"

namespace mars::matcher {

Leading phi(std::span<const std::string> aspects, std::span<const double> scores) {
    if (aspects.empty()) throw std::invalid_argument("phi: empty aspect list");
    if (aspects.size() != scores.size()) throw std::invalid_argument("phi: aspects/scores length mismatch");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return {aspects[best], scores[best]};
}

std::string_view to_string(MatchedBy m) {
    switch (m) {
        case MatchedBy::exact: return "exact";
        case MatchedBy::substring: return "substring";
        case MatchedBy::semantic: return "semantic";
    }
    return "exact";
}

std::string_view to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::existing_l3: return "existing_l3";
        case OutcomeKind::new_l4: return "new_l4";
        case OutcomeKind::new_aspect: return "new_aspect";
    }
    return "existing_l3";
}

namespace {

bool contains_run(const std::vector<std::string_view>& hay, const std::vector<std::string_view>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
    return false;
}

}  // namespace

std::optional<SyntacticHit> syntactic_match(std::string_view generated, const Taxonomy& tax) {
    const std::string g = text::normalise_name(generated);
    if (g.empty()) return std::nullopt;
    if (const auto* hit = tax.find_l3(g)) return SyntacticHit{hit->name, MatchedBy::exact};

    const auto g_tokens = text::whitespace_tokens(g);
    const L3Aspect* best = nullptr;
    std::size_t best_tokens = 0, best_chars = 0;
    for (const auto& a : tax.l3()) {
        const std::string name = text::normalise_name(a.name);
        const auto tokens = text::whitespace_tokens(name);
        if (!contains_run(tokens, g_tokens)) continue;
        // Most specific superstring: fewest tokens, then fewest bytes, then declaration order.
        if (!best || tokens.size() < best_tokens || (tokens.size() == best_tokens && name.size() < best_chars)) {
            best = &a;
            best_tokens = tokens.size();
            best_chars = name.size();
        }
    }
    if (best) return SyntacticHit{best->name, MatchedBy::substring};
    return std::nullopt;
}

SemanticScores semantic_scores(std::string_view generated, std::string_view verbatim, const Taxonomy& tax,
                               EmbeddingProvider& emb) {
    const auto& l3 = tax.l3();
    if (l3.empty()) throw std::invalid_argument("semantic_scores: taxonomy has no L3 aspects");

    std::vector<std::string> names;
    std::vector<std::string> keywords;
    std::vector<std::size_t> owner;  // keyword -> L3 index
    for (std::size_t i = 0; i < l3.size(); ++i) {
        names.push_back(l3[i].name);
        for (const auto& k : l3[i].keywords) {
            keywords.push_back(k);
            owner.push_back(i);
        }
    }

    std::vector<std::string> batch{std::string(generated), std::string(verbatim)};
    batch.insert(batch.end(), names.begin(), names.end());
    batch.insert(batch.end(), keywords.begin(), keywords.end());
    auto vectors = checked_embed(emb, batch);

    const Vector& g = vectors[0];
    const Vector& v = vectors[1];
    const auto name_matrix = kernels::Matrix::from_rows({vectors.begin() + 2, vectors.begin() + 2 + names.size()});
    const auto topic = kernels::cosine_scores(g, name_matrix);

    std::vector<double> verbatim_best(l3.size(), -1.0);
    if (!keywords.empty()) {
        const auto kw_matrix = kernels::Matrix::from_rows({vectors.begin() + 2 + names.size(), vectors.end()});
        const auto kw_scores = kernels::cosine_scores(v, kw_matrix);
        for (std::size_t k = 0; k < kw_scores.size(); ++k) {
            verbatim_best[owner[k]] = std::max(verbatim_best[owner[k]], kw_scores[k]);
        }
    }

    const auto t = phi(names, topic);
    const auto vb = phi(names, verbatim_best);
    return {t.aspect, t.score, vb.aspect, vb.score};
}

OutcomeKind classify(double score_t, double score_v, const MatchThresholds& th) {
    if (score_t > th.sem_replace) return OutcomeKind::existing_l3;
    if (score_t > th.sem_l4_topic && score_v > th.sem_l4_verbatim) return OutcomeKind::new_l4;
    return OutcomeKind::new_aspect;
}

NewAspectRegistry::NewAspectRegistry(const std::filesystem::path& audit_file) {
    audit_.emplace(audit_file, std::ios::app);
    if (!*audit_) throw InputError("cannot open new-aspect audit file " + audit_file.string());
}

void NewAspectRegistry::append(NewAspectEntry entry) {
    std::lock_guard lock(mutex_);
    if (audit_) {
        const nlohmann::json j{{"name", entry.name},           {"entity_id", entry.entity_id},
                               {"review_id", entry.review_id}, {"nearest_l3", entry.nearest_l3},
                               {"score_t", entry.score_t},     {"score_v", entry.score_v}};
        *audit_ << j.dump() << '\n';
        audit_->flush();
    }
    entries_.push_back(std::move(entry));
}

std::vector<NewAspectEntry> NewAspectRegistry::snapshot() const {
    std::lock_guard lock(mutex_);
    auto out = entries_;
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.review_id, a.name) < std::tie(b.review_id, b.name);
    });
    return out;
}

std::size_t NewAspectRegistry::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

MatchOutcome standardise(std::string_view generated, std::string_view verbatim, const Taxonomy& tax,
                         EmbeddingProvider& emb, const MatchThresholds& th, NewAspectRegistry* registry,
                         const MatchContext& ctx) {
    if (auto hit = syntactic_match(generated, tax)) {
        MatchOutcome out;
        out.resolved_aspect = hit->l3;
        out.score_t = 1.0;
        out.matched_by = hit->by;
        return out;
    }
    const auto s = semantic_scores(generated, verbatim, tax, emb);
    MatchOutcome out;
    out.kind = classify(s.score_t, s.score_v, th);
    out.score_t = s.score_t;
    out.score_v = s.score_v;
    out.matched_by = MatchedBy::semantic;
    out.verbatim_l3 = s.aspect_v;
    switch (out.kind) {
        case OutcomeKind::existing_l3:
            out.resolved_aspect = s.aspect_t;
            break;
        case OutcomeKind::new_l4:
            out.resolved_aspect = std::string(text::trim(generated));
            out.parent_l3 = s.aspect_t;
            break;
        case OutcomeKind::new_aspect:
            out.resolved_aspect = std::string(text::trim(generated));
            if (registry) {
                registry->append({out.resolved_aspect, ctx.entity_id, ctx.review_id, s.aspect_t, s.score_t,
                                  s.score_v});
            }
            break;
    }
    return out;
}

}  // namespace mars::matcher

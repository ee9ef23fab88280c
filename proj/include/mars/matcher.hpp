#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mars/embedding.hpp"
#include "mars/kernels.hpp"
#include "mars/model.hpp"
#include "mars/taxonomy.hpp"

namespace mars::matcher {

using kernels::cosine;

struct Leading {
    std::string aspect;
    double score = 0.0;
};

/// Leading aspect by score: argmax with ties going to the lowest index.
/// Throws std::invalid_argument on empty or mismatched input.
Leading phi(std::span<const std::string> aspects, std::span<const double> scores);

enum class MatchedBy { exact, substring, semantic };
enum class OutcomeKind { existing_l3, new_l4, new_aspect };

std::string_view to_string(MatchedBy m);
std::string_view to_string(OutcomeKind k);

struct SyntacticHit {
    std::string l3;
    MatchedBy by = MatchedBy::exact;
};

/// Exact match on the normalised name, else the shortest L3 whose token
/// sequence contains gA's tokens as a contiguous run.
std::optional<SyntacticHit> syntactic_match(std::string_view generated, const Taxonomy& tax);

struct SemanticScores {
    std::string aspect_t;
    double score_t = 0.0;
    std::string aspect_v;
    double score_v = 0.0;
};

/// Topic score against L3 names and verbatim score against each L3's
/// keywords (max over keywords), each reduced with phi.
SemanticScores semantic_scores(std::string_view generated, std::string_view verbatim, const Taxonomy& tax,
                               EmbeddingProvider& emb);

/// The strict-inequality decision table over the two scores.
OutcomeKind classify(double score_t, double score_v, const MatchThresholds& th);

struct MatchOutcome {
    OutcomeKind kind = OutcomeKind::existing_l3;
    /// existing_l3: the taxonomy L3. new_l4 / new_aspect: the generated name.
    std::string resolved_aspect;
    /// Parent L3 for new_l4 (aspect_t); empty otherwise.
    std::string parent_l3;
    /// aspect_v, kept so the L4 parent choice can be audited.
    std::string verbatim_l3;
    double score_t = 0.0;
    double score_v = 0.0;
    MatchedBy matched_by = MatchedBy::exact;
};

struct NewAspectEntry {
    std::string name;
    std::string entity_id;
    std::string review_id;
    std::string nearest_l3;
    double score_t = 0.0;
    double score_v = 0.0;
};

/// Append-only registry of emergent aspects, safe for concurrent appends.
/// When given a path, every entry is also appended to that JSONL audit file.
class NewAspectRegistry {
public:
    NewAspectRegistry() = default;
    explicit NewAspectRegistry(const std::filesystem::path& audit_file);

    void append(NewAspectEntry entry);
    /// Entries sorted by (review_id, name) so output does not depend on thread timing.
    std::vector<NewAspectEntry> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<NewAspectEntry> entries_;
    std::optional<std::ofstream> audit_;
};

struct MatchContext {
    std::string entity_id;
    std::string review_id;
};

/// Syntactic match first; on a miss, semantic scores and the decision table.
/// new_aspect outcomes are appended to the registry when one is given.
MatchOutcome standardise(std::string_view generated, std::string_view verbatim, const Taxonomy& tax,
                         EmbeddingProvider& emb, const MatchThresholds& th, NewAspectRegistry* registry = nullptr,
                         const MatchContext& ctx = {});

}  // namespace mars::matcher

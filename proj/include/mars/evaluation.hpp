#pragma once

#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mars/embedding.hpp"
#include "mars/model.hpp"

namespace mars::evaluation {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RougeScores {
    Prf r1, r2, rl;
};

/// Lowercase word tokens, no stemming. Empty candidate or reference throws
/// std::invalid_argument.
RougeScores rouge(std::string_view candidate, std::string_view reference);

/// Greedy token matching F1 over embedding cosines, clamped to [0, 1].
double embed_score(std::string_view candidate, std::string_view reference, EmbeddingProvider& embeddings);

enum class Criterion { aspect_specificity, factuality, coverage, fluency, brevity };

inline constexpr Criterion kAllCriteria[] = {Criterion::aspect_specificity, Criterion::factuality,
                                             Criterion::coverage, Criterion::fluency, Criterion::brevity};

std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view s);

struct LikertRecord {
    std::string item_id;
    Criterion criterion = Criterion::coverage;
    std::string rater_id;
    int score = 3;
};

/// Header `item_id,criterion,rater_id,score`; scores outside 1..5 are errors.
std::vector<LikertRecord> parse_likert_csv(std::istream& in);

inline constexpr double kZ95 = 1.96;

struct MoeSummary {
    Criterion criterion = Criterion::coverage;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    double z = kZ95;
    double moe = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Sample standard deviation (n - 1 denominator). Needs at least 2 values.
double sample_sd(std::span<const double> values);
MoeSummary moe_from_stats(Criterion criterion, double mean, double sd, std::size_t n);
/// Records of one criterion; when a rater named "final" is present only its
/// reconciled scores are used. Fewer than 2 scores throws InputError.
MoeSummary moe(std::span<const LikertRecord> records, Criterion criterion);

/// Stats CSV with header `criterion,mean,sd,n`, for published aggregates.
std::vector<MoeSummary> parse_stats_csv(std::istream& in);

enum class ChanceModel {
    pooled,     // both raters' labels pooled into one marginal (Scott)
    per_rater,  // product of each rater's marginals (classic Cohen)
};

/// (p_o - p_e) / (1 - p_e); 1 when p_e = 1 and p_o = 1.
double cohens_kappa(std::span<const int> a, std::span<const int> b, ChanceModel model = ChanceModel::pooled);

struct SummaryScore {
    std::string entity_id;
    RougeScores rouge;
    double embed = 0.0;
};

struct KappaScore {
    std::string rater_a;
    std::string rater_b;
    std::size_t n = 0;
    double kappa = 0.0;
};

struct EvalReport {
    std::vector<SummaryScore> summaries;
    std::optional<RougeScores> mean_rouge;
    double mean_embed = 0.0;
    std::vector<MoeSummary> human;  // empty: no human data
    std::vector<KappaScore> agreement;
    std::vector<std::string> warnings;
};

/// Scores each bundle's overall summary against the reference of its entity,
/// MoE per criterion from raw records or precomputed stats, kappa per rater pair.
EvalReport report(std::span<const SummaryBundle> bundles, const std::map<std::string, std::string>& references,
                  std::span<const LikertRecord> likert, std::span<const MoeSummary> stats,
                  EmbeddingProvider& embeddings);

nlohmann::json to_json(const EvalReport& r);
/// Aligned text table: R1 / R2 / R-L / score per entity, then the criteria.
std::string format_table(const EvalReport& r);

}  // namespace mars::evaluation

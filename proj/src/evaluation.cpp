#include "mars/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mars/kernels.hpp"
#include "mars/text.hpp"

namespace mars::evaluation {

namespace {

Prf prf(double overlap, std::size_t cand, std::size_t ref) {
    Prf s;
    s.precision = cand ? overlap / static_cast<double>(cand) : 0.0;
    s.recall = ref ? overlap / static_cast<double>(ref) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

std::map<std::string, std::size_t> ngrams(const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key = toks[i];
        for (std::size_t j = 1; j < n; ++j) key += '\x1f' + toks[i + j];
        ++out[key];
    }
    return out;
}

Prf ngram_overlap(const std::vector<std::string>& c, const std::vector<std::string>& r, std::size_t n) {
    const auto cg = ngrams(c, n), rg = ngrams(r, n);
    std::size_t overlap = 0;
    for (const auto& [g, count] : cg) {
        const auto it = rg.find(g);
        if (it != rg.end()) overlap += std::min(count, it->second);
    }
    const auto total = [n](std::size_t len) { return len >= n ? len - n + 1 : 0; };
    return prf(static_cast<double>(overlap), total(c.size()), total(r.size()));
}

std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

RougeScores rouge(std::string_view candidate, std::string_view reference) {
    const auto c = text::word_tokens(candidate);
    const auto r = text::word_tokens(reference);
    if (c.empty() || r.empty()) throw std::invalid_argument("rouge: empty candidate or reference");
    RougeScores s;
    s.r1 = ngram_overlap(c, r, 1);
    s.r2 = ngram_overlap(c, r, 2);
    s.rl = prf(static_cast<double>(lcs(c, r)), c.size(), r.size());
    return s;
}

double embed_score(std::string_view candidate, std::string_view reference, EmbeddingProvider& embeddings) {
    const auto c = text::word_tokens(candidate);
    const auto r = text::word_tokens(reference);
    if (c.empty() || r.empty()) throw std::invalid_argument("embed_score: empty candidate or reference");

    std::vector<std::string> vocab;
    std::map<std::string, std::size_t> at;
    for (const auto* side : {&c, &r}) {
        for (const auto& t : *side) {
            if (at.emplace(t, vocab.size()).second) vocab.push_back(t);
        }
    }
    const auto vectors = checked_embed(embeddings, vocab);
    std::vector<Vector> cv, rv;
    for (const auto& t : c) cv.push_back(vectors[at[t]]);
    for (const auto& t : r) rv.push_back(vectors[at[t]]);
    const auto sim = kernels::cosine_matrix(kernels::Matrix::from_rows(cv), kernels::Matrix::from_rows(rv));

    double p = 0.0, q = 0.0;
    for (std::size_t i = 0; i < sim.rows; ++i) {
        double best = -1.0;
        for (std::size_t j = 0; j < sim.cols; ++j) best = std::max(best, sim.at(i, j));
        p += best;
    }
    for (std::size_t j = 0; j < sim.cols; ++j) {
        double best = -1.0;
        for (std::size_t i = 0; i < sim.rows; ++i) best = std::max(best, sim.at(i, j));
        q += best;
    }
    p /= static_cast<double>(sim.rows);
    q /= static_cast<double>(sim.cols);
    const double f = p + q > 0.0 ? 2.0 * p * q / (p + q) : 0.0;
    return std::clamp(f, 0.0, 1.0);
}

std::string_view to_string(Criterion c) {
    switch (c) {
        case Criterion::aspect_specificity: return "aspect_specificity";
        case Criterion::factuality: return "factuality";
        case Criterion::coverage: return "coverage";
        case Criterion::fluency: return "fluency";
        case Criterion::brevity: return "brevity";
    }
    return "coverage";
}

Criterion parse_criterion(std::string_view s) {
    std::string folded = text::casefold(text::trim(s));
    std::replace(folded.begin(), folded.end(), '-', '_');
    std::replace(folded.begin(), folded.end(), ' ', '_');
    for (auto c : kAllCriteria) {
        if (folded == to_string(c)) return c;
    }
    throw InputError("unknown criterion \"" + std::string(s) + "\"");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::string(text::trim(cell)));
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    out.push_back(std::string(text::trim(cell)));
    return out;
}

// Reads rows after checking the header; returns (line number, cells).
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(std::istream& in,
                                                                       const std::vector<std::string>& header) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::string line;
    std::size_t n = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (!seen_header) {
            for (auto& c : cells) c = text::casefold(c);
            const bool ok = cells.size() >= header.size() && std::equal(header.begin(), header.end(), cells.begin());
            if (!ok) throw InputError("line " + std::to_string(n) + ": expected header " + text::join(header, ","));
            seen_header = true;
            continue;
        }
        if (cells.size() < header.size()) {
            throw InputError("line " + std::to_string(n) + ": expected " + std::to_string(header.size()) + " columns");
        }
        rows.emplace_back(n, std::move(cells));
    }
    return rows;
}

double parse_number(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError("line " + std::to_string(line) + ": not a number: \"" + s + "\"");
    }
}

}  // namespace

std::vector<LikertRecord> parse_likert_csv(std::istream& in) {
    std::vector<LikertRecord> out;
    for (auto& [line, cells] : read_csv(in, {"item_id", "criterion", "rater_id", "score"})) {
        const double v = parse_number(cells[3], line);
        if (v != std::floor(v) || v < 1 || v > 5) {
            throw InputError("line " + std::to_string(line) + ": score must be an integer 1-5");
        }
        try {
            out.push_back({cells[0], parse_criterion(cells[1]), cells[2], static_cast<int>(v)});
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

std::vector<MoeSummary> parse_stats_csv(std::istream& in) {
    std::vector<MoeSummary> out;
    for (auto& [line, cells] : read_csv(in, {"criterion", "mean", "sd", "n"})) {
        const double n = parse_number(cells[3], line);
        if (n < 2 || n != std::floor(n)) throw InputError("line " + std::to_string(line) + ": n must be >= 2");
        try {
            out.push_back(moe_from_stats(parse_criterion(cells[0]), parse_number(cells[1], line),
                                         parse_number(cells[2], line), static_cast<std::size_t>(n)));
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) throw InputError("standard deviation needs at least 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

MoeSummary moe_from_stats(Criterion criterion, double mean, double sd, std::size_t n) {
    if (n < 2) throw InputError("margin of error needs n >= 2");
    if (sd < 0.0) throw InputError("negative standard deviation");
    MoeSummary s;
    s.criterion = criterion;
    s.mean = mean;
    s.sd = sd;
    s.n = n;
    s.moe = s.z * sd / std::sqrt(static_cast<double>(n));
    s.ci_low = mean - s.moe;
    s.ci_high = mean + s.moe;
    return s;
}

MoeSummary moe(std::span<const LikertRecord> records, Criterion criterion) {
    const bool has_final = std::any_of(records.begin(), records.end(), [&](const LikertRecord& r) {
        return r.criterion == criterion && r.rater_id == "final";
    });
    std::vector<double> scores;
    for (const auto& r : records) {
        if (r.criterion == criterion && (!has_final || r.rater_id == "final")) scores.push_back(r.score);
    }
    if (scores.size() < 2) {
        throw InputError("criterion " + std::string(to_string(criterion)) + ": fewer than 2 ratings");
    }
    double mean = 0.0;
    for (double v : scores) mean += v;
    mean /= static_cast<double>(scores.size());
    return moe_from_stats(criterion, mean, sample_sd(scores), scores.size());
}

double cohens_kappa(std::span<const int> a, std::span<const int> b, ChanceModel model) {
    if (a.size() != b.size()) throw std::invalid_argument("cohens_kappa: rating lists differ in length");
    if (a.empty()) throw std::invalid_argument("cohens_kappa: no ratings");
    const double n = static_cast<double>(a.size());
    std::map<int, double> ca, cb;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
        agree += a[i] == b[i] ? 1.0 : 0.0;
    }
    std::set<int> labels;
    for (const auto& [k, v] : ca) labels.insert(k);
    for (const auto& [k, v] : cb) labels.insert(k);

    const double po = agree / n;
    double pe = 0.0;
    for (int k : labels) {
        const double pa = ca[k] / n, pb = cb[k] / n;
        pe += model == ChanceModel::pooled ? ((pa + pb) / 2.0) * ((pa + pb) / 2.0) : pa * pb;
    }
    if (1.0 - pe <= 1e-12) return po >= 1.0 - 1e-12 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

EvalReport report(std::span<const SummaryBundle> bundles, const std::map<std::string, std::string>& references,
                  std::span<const LikertRecord> likert, std::span<const MoeSummary> stats,
                  EmbeddingProvider& embeddings) {
    EvalReport out;
    for (const auto& b : bundles) {
        const auto it = references.find(b.entity_id);
        if (it == references.end()) {
            out.warnings.push_back("no reference for entity " + b.entity_id + "; skipped");
            continue;
        }
        if (text::word_tokens(b.overall_summary).empty()) {
            out.warnings.push_back("empty summary for entity " + b.entity_id + "; skipped");
            continue;
        }
        out.summaries.push_back({b.entity_id, {}, 0.0});
    }
    kernels::parallel_for(out.summaries.size(), [&](std::size_t i) {
        auto& s = out.summaries[i];
        const auto& cand = std::find_if(bundles.begin(), bundles.end(), [&](const SummaryBundle& b) {
                               return b.entity_id == s.entity_id;
                           })->overall_summary;
        const auto& ref = references.at(s.entity_id);
        s.rouge = rouge(cand, ref);
        s.embed = embed_score(cand, ref, embeddings);
    });
    if (!out.summaries.empty()) {
        RougeScores m;
        auto add = [](Prf& acc, const Prf& x) {
            acc.precision += x.precision;
            acc.recall += x.recall;
            acc.f1 += x.f1;
        };
        for (const auto& s : out.summaries) {
            add(m.r1, s.rouge.r1);
            add(m.r2, s.rouge.r2);
            add(m.rl, s.rouge.rl);
            out.mean_embed += s.embed;
        }
        const double k = static_cast<double>(out.summaries.size());
        for (Prf* p : {&m.r1, &m.r2, &m.rl}) {
            p->precision /= k;
            p->recall /= k;
            p->f1 /= k;
        }
        out.mean_embed /= k;
        out.mean_rouge = m;
    }

    for (auto c : kAllCriteria) {
        const auto pre = std::find_if(stats.begin(), stats.end(), [&](const MoeSummary& s) { return s.criterion == c; });
        if (pre != stats.end()) {
            out.human.push_back(*pre);
            continue;
        }
        const auto count = std::count_if(likert.begin(), likert.end(), [&](const LikertRecord& r) {
            return r.criterion == c;
        });
        if (count >= 2) {
            out.human.push_back(moe(likert, c));
        } else if (count == 1) {
            out.warnings.push_back("criterion " + std::string(to_string(c)) + ": a single rating, no MoE");
        }
    }

    // Agreement per rater pair over the (item, criterion) cells both rated.
    std::map<std::string, std::map<std::pair<std::string, Criterion>, int>> by_rater;
    for (const auto& r : likert) {
        if (r.rater_id != "final") by_rater[r.rater_id][{r.item_id, r.criterion}] = r.score;
    }
    for (auto a = by_rater.begin(); a != by_rater.end(); ++a) {
        for (auto b = std::next(a); b != by_rater.end(); ++b) {
            std::vector<int> xa, xb;
            for (const auto& [cell, score] : a->second) {
                const auto it = b->second.find(cell);
                if (it == b->second.end()) continue;
                xa.push_back(score);
                xb.push_back(it->second);
            }
            if (xa.empty()) continue;
            out.agreement.push_back({a->first, b->first, xa.size(), cohens_kappa(xa, xb)});
        }
    }
    return out;
}

namespace {

nlohmann::json prf_json(const Prf& p) {
    return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

nlohmann::json rouge_json(const RougeScores& r) {
    return {{"rouge1", prf_json(r.r1)}, {"rouge2", prf_json(r.r2)}, {"rougeL", prf_json(r.rl)}};
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["summaries"] = nlohmann::json::array();
    for (const auto& s : r.summaries) {
        j["summaries"].push_back({{"entity_id", s.entity_id}, {"rouge", rouge_json(s.rouge)}, {"embed_score", s.embed}});
    }
    if (r.mean_rouge) {
        j["mean"] = {{"rouge", rouge_json(*r.mean_rouge)}, {"embed_score", r.mean_embed}};
    }
    if (r.human.empty()) {
        j["human"] = "n/a";
    } else {
        j["human"] = nlohmann::json::array();
        for (const auto& h : r.human) {
            j["human"].push_back({{"criterion", to_string(h.criterion)},
                                  {"mean", h.mean},
                                  {"sd", h.sd},
                                  {"n", h.n},
                                  {"z", h.z},
                                  {"moe", h.moe},
                                  {"ci", {h.ci_low, h.ci_high}}});
        }
    }
    j["agreement"] = nlohmann::json::array();
    for (const auto& k : r.agreement) {
        j["agreement"].push_back({{"rater_a", k.rater_a}, {"rater_b", k.rater_b}, {"n", k.n}, {"kappa", k.kappa}});
    }
    j["warnings"] = r.warnings;
    return j;
}

std::string format_table(const EvalReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(20) << "entity" << std::right << std::setw(8) << "R1" << std::setw(8) << "R2"
       << std::setw(8) << "R-L" << std::setw(8) << "score" << '\n';
    auto row = [&](const std::string& name, const RougeScores& s, double e) {
        os << std::left << std::setw(20) << name << std::right << std::setw(8) << fixed(s.r1.f1, 4) << std::setw(8)
           << fixed(s.r2.f1, 4) << std::setw(8) << fixed(s.rl.f1, 4) << std::setw(8) << fixed(e, 4) << '\n';
    };
    for (const auto& s : r.summaries) row(s.entity_id, s.rouge, s.embed);
    if (r.mean_rouge) row("mean", *r.mean_rouge, r.mean_embed);
    if (r.summaries.empty()) os << "(no scored summaries)\n";

    os << '\n' << std::left << std::setw(20) << "criterion" << std::right << std::setw(8) << "mean" << std::setw(8)
       << "sd" << std::setw(6) << "n" << std::setw(10) << "moe" << '\n';
    if (r.human.empty()) {
        os << std::left << std::setw(20) << "human" << "n/a\n";
    }
    for (const auto& h : r.human) {
        os << std::left << std::setw(20) << to_string(h.criterion) << std::right << std::setw(8) << fixed(h.mean, 2)
           << std::setw(8) << fixed(h.sd, 2) << std::setw(6) << h.n << std::setw(10) << fixed(h.moe, 5) << '\n';
    }
    if (!r.agreement.empty()) {
        os << '\n';
        for (const auto& k : r.agreement) {
            os << "kappa " << k.rater_a << "/" << k.rater_b << " (n=" << k.n << "): " << fixed(k.kappa, 4) << '\n';
        }
    }
    return os.str();
}

}  // namespace mars::evaluation

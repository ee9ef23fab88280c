#include "mars/corpus.hpp"

#include <fstream>
#include <set>

#include "mars/text.hpp"

namespace mars {

namespace {

const json& field(const json& j, const char* key) {
    if (!j.contains(key)) throw InputError(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

std::string string_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) throw InputError(std::string("field \"") + key + "\" must be a string");
    return v.get<std::string>();
}

json verbatims_to_json(const std::vector<Verbatim>& vs) {
    json arr = json::array();
    for (const auto& v : vs) arr.push_back({{"text", v.text}, {"language", to_string(v.language)}});
    return arr;
}

std::vector<Verbatim> verbatims_from_json(const json& arr) {
    if (!arr.is_array()) throw InputError("verbatim list must be an array");
    std::vector<Verbatim> out;
    for (const auto& v : arr) out.push_back({string_field(v, "text"), parse_language(string_field(v, "language"))});
    return out;
}

}  // namespace

json to_json(const Review& r) {
    json j{{"review_id", r.review_id}, {"entity_id", r.entity_id}, {"language", to_string(r.language)},
           {"text", r.text}};
    if (r.rating) j["rating"] = *r.rating;
    return j;
}

Review review_from_json(const json& j) {
    if (!j.is_object()) throw InputError("review must be a JSON object");
    std::optional<int> rating;
    if (j.contains("rating") && !j.at("rating").is_null()) {
        if (!j.at("rating").is_number_integer()) throw InputError("field \"rating\" must be an integer");
        rating = j.at("rating").get<int>();
    }
    return Review::make(string_field(j, "review_id"), string_field(j, "entity_id"),
                        parse_language(string_field(j, "language")), string_field(j, "text"), rating);
}

json to_json(const Insight& i) {
    json j{{"entity_id", i.entity_id},
           {"review_id", i.review_id},
           {"l1_aspect", i.l1_aspect},
           {"l2_aspect", i.l2_aspect},
           {"l3_aspect", i.l3_aspect},
           {"new_aspect", i.new_aspect},
           {"sentiment", to_string(i.sentiment)},
           {"source_verbatims", verbatims_to_json(i.source_verbatims)},
           {"translated_verbatims", verbatims_to_json(i.translated_verbatims)}};
    if (i.l4_aspect) j["l4_aspect"] = *i.l4_aspect;
    return j;
}

Insight insight_from_json(const json& j) {
    Insight i;
    i.entity_id = string_field(j, "entity_id");
    i.review_id = string_field(j, "review_id");
    i.l1_aspect = string_field(j, "l1_aspect");
    i.l2_aspect = string_field(j, "l2_aspect");
    i.l3_aspect = string_field(j, "l3_aspect");
    if (j.contains("l4_aspect") && j.at("l4_aspect").is_string()) i.l4_aspect = j.at("l4_aspect").get<std::string>();
    i.new_aspect = j.value("new_aspect", false);
    i.sentiment = parse_sentiment(string_field(j, "sentiment"));
    i.source_verbatims = verbatims_from_json(field(j, "source_verbatims"));
    i.translated_verbatims = verbatims_from_json(field(j, "translated_verbatims"));
    return i;
}

json to_json(const SummaryBundle& b) {
    return json{{"entity_id", b.entity_id},
                {"target_language", to_string(b.target_language)},
                {"aspect_summaries", b.aspect_summaries},
                {"overall_summary", b.overall_summary},
                {"overall_by_sentiment", b.overall_by_sentiment},
                {"provenance", b.provenance},
                {"aspect_stats", b.aspect_stats}};
}

SummaryBundle bundle_from_json(const json& j) {
    SummaryBundle b;
    b.entity_id = string_field(j, "entity_id");
    b.target_language = parse_language(string_field(j, "target_language"));
    b.aspect_summaries = field(j, "aspect_summaries").get<std::map<std::string, std::string>>();
    b.overall_summary = string_field(j, "overall_summary");
    if (j.contains("overall_by_sentiment")) {
        b.overall_by_sentiment = j.at("overall_by_sentiment").get<std::map<std::string, std::string>>();
    }
    b.provenance = field(j, "provenance").get<std::map<std::string, std::vector<std::string>>>();
    b.aspect_stats = field(j, "aspect_stats").get<std::map<std::string, int>>();
    return b;
}

std::vector<Review> parse_corpus(std::istream& in) {
    std::vector<Review> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(where + "malformed JSON (" + e.what() + ")");
        }
        Review r;
        try {
            r = review_from_json(j);
        } catch (const InputError& e) {
            throw InputError(where + e.what());
        }
        if (!ids.insert(r.review_id).second) {
            throw InputError(where + "duplicate review_id " + r.review_id);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Review> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open corpus " + path.string());
    return parse_corpus(in);
}

void write_jsonl(std::ostream& out, const std::vector<json>& rows) {
    for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<json> read_jsonl(std::istream& in) {
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw InputError("line " + std::to_string(lineno) + ": malformed JSON (" + e.what() + ")");
        }
    }
    return rows;
}

}  // namespace mars

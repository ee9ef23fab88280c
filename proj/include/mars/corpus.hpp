#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mars/model.hpp"

namespace mars {

using json = nlohmann::json;

json to_json(const Review& r);
Review review_from_json(const json& j);

json to_json(const Insight& i);
Insight insight_from_json(const json& j);

json to_json(const SummaryBundle& b);
SummaryBundle bundle_from_json(const json& j);

/// One review object per line, UTF-8. Blank lines are skipped. Errors carry
/// the 1-based line number; a repeated review_id is rejected.
std::vector<Review> parse_corpus(std::istream& in);
std::vector<Review> load_corpus(const std::filesystem::path& path);

void write_jsonl(std::ostream& out, const std::vector<json>& rows);
std::vector<json> read_jsonl(std::istream& in);

}  // namespace mars

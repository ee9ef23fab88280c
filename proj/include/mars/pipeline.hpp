#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mars/config.hpp"
#include "mars/corpus.hpp"
#include "mars/extractor.hpp"
#include "mars/matcher.hpp"

namespace mars::pipeline {

struct ExtractReport {
    std::size_t reviews = 0;
    std::size_t insights = 0;
    std::size_t new_aspects = 0;
    extractor::ClrStats clr;
    std::vector<std::string> warnings;
};

/// Corpus + taxonomy to an insight store in `out_dir`, with clr.json and
/// new_aspects.jsonl alongside.
ExtractReport extract_to_store(const config::AppConfig& cfg, const std::filesystem::path& corpus,
                               const std::filesystem::path& taxonomy, const std::filesystem::path& out_dir);

/// One SummaryBundle row per entity of the store (or only `entity`).
std::vector<json> summarise_store(const config::AppConfig& cfg, const std::filesystem::path& store,
                                  const std::string& entity, const Taxonomy& taxonomy,
                                  std::vector<std::string>* warnings = nullptr);

}  // namespace mars::pipeline

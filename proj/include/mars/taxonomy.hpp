#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mars {

/// Granular aspects below this keyword count get a validation warning.
inline constexpr std::size_t kRecommendedKeywords = 15;

struct L3Aspect {
    std::string name;
    std::string parent;  // L2 name
    std::vector<std::string> keywords;
};

struct L2Aspect {
    std::string name;
    std::string parent;  // L1 name
};

/// Three-level aspect hierarchy. Order of declaration is kept: it is the
/// tie-break order for argmax matching.
class Taxonomy {
public:
    Taxonomy() = default;
    Taxonomy(std::vector<std::string> l1, std::vector<L2Aspect> l2, std::vector<L3Aspect> l3,
             std::vector<std::string> new_aspects = {});

    const std::vector<std::string>& l1() const { return l1_; }
    const std::vector<L2Aspect>& l2() const { return l2_; }
    const std::vector<L3Aspect>& l3() const { return l3_; }
    const std::vector<std::string>& new_aspects() const { return new_aspects_; }

    /// Case-insensitive lookup; returns the canonical L3 entry.
    const L3Aspect* find_l3(std::string_view name) const;
    const L2Aspect* find_l2(std::string_view name) const;
    bool has_l1(std::string_view name) const;

    /// (L1, L2) for a known L3; nullopt when the L3 or a parent link is missing.
    std::optional<std::pair<std::string, std::string>> ancestors(std::string_view l3_name) const;

private:
    std::vector<std::string> l1_;
    std::vector<L2Aspect> l2_;
    std::vector<L3Aspect> l3_;
    std::vector<std::string> new_aspects_;
    std::map<std::string, std::size_t> l2_index_;  // normalised name -> position
    std::map<std::string, std::size_t> l3_index_;
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool valid() const { return errors.empty(); }
};

ValidationReport validate_taxonomy(const Taxonomy& tax);

/// Parses the YAML document shape:
///
///   l1: [Electronics]
///   l2: {Power: Electronics}
///   l3: {battery life: Power}
///   keywords: {battery life: [battery, charge, ...]}
///   new_aspects: []          # optional
///
/// Structural problems (missing keys, wrong node kinds) throw InputError;
/// semantic problems are left for validate_taxonomy.
Taxonomy parse_taxonomy_yaml(std::string_view document);
Taxonomy load_taxonomy(const std::filesystem::path& path);
/// load_taxonomy + validate_taxonomy; throws InputError listing errors.
Taxonomy load_valid_taxonomy(const std::filesystem::path& path);

}  // namespace mars

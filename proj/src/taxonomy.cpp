#include "mars/taxonomy.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mars/model.hpp"
#include "mars/text.hpp"

namespace mars {

Taxonomy::Taxonomy(std::vector<std::string> l1, std::vector<L2Aspect> l2, std::vector<L3Aspect> l3,
                   std::vector<std::string> new_aspects)
    : l1_(std::move(l1)), l2_(std::move(l2)), l3_(std::move(l3)), new_aspects_(std::move(new_aspects)) {
    for (std::size_t i = 0; i < l2_.size(); ++i) l2_index_.emplace(text::normalise_name(l2_[i].name), i);
    for (std::size_t i = 0; i < l3_.size(); ++i) l3_index_.emplace(text::normalise_name(l3_[i].name), i);
}

const L3Aspect* Taxonomy::find_l3(std::string_view name) const {
    const auto it = l3_index_.find(text::normalise_name(name));
    return it == l3_index_.end() ? nullptr : &l3_[it->second];
}

const L2Aspect* Taxonomy::find_l2(std::string_view name) const {
    const auto it = l2_index_.find(text::normalise_name(name));
    return it == l2_index_.end() ? nullptr : &l2_[it->second];
}

bool Taxonomy::has_l1(std::string_view name) const {
    const std::string key = text::normalise_name(name);
    for (const auto& n : l1_) {
        if (text::normalise_name(n) == key) return true;
    }
    return false;
}

std::optional<std::pair<std::string, std::string>> Taxonomy::ancestors(std::string_view l3_name) const {
    const auto* l3 = find_l3(l3_name);
    if (!l3) return std::nullopt;
    const auto* l2 = find_l2(l3->parent);
    if (!l2 || !has_l1(l2->parent)) return std::nullopt;
    return std::make_pair(l2->parent, l2->name);
}

ValidationReport validate_taxonomy(const Taxonomy& tax) {
    ValidationReport report;
    std::map<std::string, std::string> seen;  // normalised -> "level name"
    auto claim = [&](const std::string& name, const char* level) {
        const std::string key = text::normalise_name(name);
        if (key.empty()) {
            report.errors.push_back(std::string("empty ") + level + " aspect name");
            return;
        }
        const auto [it, inserted] = seen.emplace(key, std::string(level) + " \"" + name + "\"");
        if (!inserted) {
            report.errors.push_back("duplicate aspect name \"" + name + "\" (" + level + ", already used by " +
                                    it->second + ")");
        }
    };
    for (const auto& n : tax.l1()) claim(n, "L1");
    for (const auto& a : tax.l2()) claim(a.name, "L2");
    for (const auto& a : tax.l3()) claim(a.name, "L3");

    if (tax.l3().empty()) report.errors.push_back("taxonomy has no L3 aspects");

    for (const auto& a : tax.l2()) {
        if (!tax.has_l1(a.parent)) {
            report.errors.push_back("dangling parent: L2 \"" + a.name + "\" -> missing L1 \"" + a.parent + "\"");
        }
    }
    for (const auto& a : tax.l3()) {
        if (!tax.find_l2(a.parent)) {
            report.errors.push_back("dangling parent: L3 \"" + a.name + "\" -> missing L2 \"" + a.parent + "\"");
        }
        std::size_t usable = 0;
        for (const auto& k : a.keywords) usable += text::trim(k).empty() ? 0 : 1;
        if (usable == 0) {
            report.errors.push_back("L3 \"" + a.name + "\" has an empty keyword list");
        } else if (usable < kRecommendedKeywords) {
            report.warnings.push_back("L3 \"" + a.name + "\" has " + std::to_string(usable) +
                                      " keywords, below 15 keywords recommended");
        }
    }
    return report;
}

namespace {

std::string scalar(const YAML::Node& n, const std::string& where) {
    if (!n.IsScalar()) throw InputError("taxonomy: expected a string at " + where);
    return n.as<std::string>();
}

}  // namespace

Taxonomy parse_taxonomy_yaml(std::string_view document) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(document));
    } catch (const YAML::Exception& e) {
        throw InputError(std::string("taxonomy: YAML parse error: ") + e.what());
    }
    if (!root.IsMap()) throw InputError("taxonomy: top level must be a mapping");
    for (const char* key : {"l1", "l2", "l3", "keywords"}) {
        if (!root[key]) throw InputError(std::string("taxonomy: missing key \"") + key + "\"");
    }

    std::vector<std::string> l1;
    if (!root["l1"].IsSequence()) throw InputError("taxonomy: l1 must be a list");
    for (const auto& n : root["l1"]) l1.push_back(scalar(n, "l1"));

    std::vector<L2Aspect> l2;
    if (!root["l2"].IsMap()) throw InputError("taxonomy: l2 must map names to L1 parents");
    for (const auto& kv : root["l2"]) l2.push_back({scalar(kv.first, "l2"), scalar(kv.second, "l2")});

    const YAML::Node keywords = root["keywords"];
    if (!keywords.IsMap()) throw InputError("taxonomy: keywords must map L3 names to lists");
    std::map<std::string, std::vector<std::string>> kw_by_name;
    for (const auto& kv : keywords) {
        const std::string name = scalar(kv.first, "keywords");
        std::vector<std::string> list;
        if (kv.second.IsSequence()) {
            for (const auto& k : kv.second) list.push_back(scalar(k, "keywords." + name));
        } else if (!kv.second.IsNull()) {
            throw InputError("taxonomy: keywords." + name + " must be a list");
        }
        kw_by_name[text::normalise_name(name)] = std::move(list);
    }

    std::vector<L3Aspect> l3;
    if (!root["l3"].IsMap()) throw InputError("taxonomy: l3 must map names to L2 parents");
    for (const auto& kv : root["l3"]) {
        L3Aspect a{scalar(kv.first, "l3"), scalar(kv.second, "l3"), {}};
        if (auto it = kw_by_name.find(text::normalise_name(a.name)); it != kw_by_name.end()) {
            a.keywords = it->second;
        }
        l3.push_back(std::move(a));
    }

    std::vector<std::string> fresh;
    if (const auto n = root["new_aspects"]; n && n.IsSequence()) {
        for (const auto& v : n) fresh.push_back(scalar(v, "new_aspects"));
    }
    return Taxonomy(std::move(l1), std::move(l2), std::move(l3), std::move(fresh));
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open taxonomy file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_taxonomy_yaml(ss.str());
}

Taxonomy load_valid_taxonomy(const std::filesystem::path& path) {
    Taxonomy tax = load_taxonomy(path);
    const auto report = validate_taxonomy(tax);
    if (!report.valid()) {
        throw InputError("invalid taxonomy " + path.string() + ": " + text::join(report.errors, "; "));
    }
    return tax;
}

}  // namespace mars

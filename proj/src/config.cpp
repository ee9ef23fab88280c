#include "mars/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mars/mock_backend.hpp"
#include "mars/remote.hpp"
#include "mars/text.hpp"

namespace mars::config {

BackendKind parse_backend(std::string_view s) {
    const std::string f = text::casefold(text::trim(s));
    if (f == "mock") return BackendKind::mock;
    if (f == "remote") return BackendKind::remote;
    if (f == "replay") return BackendKind::replay;
    throw InputError("unknown backend \"" + std::string(s) + "\" (mock, remote, replay)");
}

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::mock: return "mock";
        case BackendKind::remote: return "remote";
        case BackendKind::replay: return "replay";
    }
    return "mock";
}

namespace {

template <typename T>
T scalar(const YAML::Node& n, const std::string& key) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw InputError("config: bad value for " + key);
    }
}

void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
    if (!n.IsMap()) throw InputError("config: " + where + " must be a mapping");
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw InputError("config: unknown key " + where + key);
    }
}

}  // namespace

void apply_yaml(AppConfig& cfg, const std::string& document) {
    YAML::Node root;
    try {
        root = YAML::Load(document);
    } catch (const YAML::Exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    if (root.IsNull()) return;
    check_keys(root, "",
               {"target_language", "context_length", "top_aspect_count", "words_per_aspect", "thresholds",
                "selection", "seed", "overall_mode", "grounding_jaccard", "backend", "batching", "data_dir",
                "prompts_dir", "mock_latency_ms"});
    auto& p = cfg.pipeline;
    auto set = [&](const char* key, auto&& fn) {
        if (root[key]) {
            fn(root[key]);
            cfg.sources[key] = "file";
        }
    };
    set("target_language", [&](const YAML::Node& n) { p.target_language = parse_language(scalar<std::string>(n, "target_language")); });
    set("context_length", [&](const YAML::Node& n) { p.context_length = scalar<std::size_t>(n, "context_length"); });
    set("top_aspect_count", [&](const YAML::Node& n) { p.top_aspect_count = scalar<std::size_t>(n, "top_aspect_count"); });
    set("words_per_aspect", [&](const YAML::Node& n) { p.words_per_aspect = scalar<std::size_t>(n, "words_per_aspect"); });
    set("seed", [&](const YAML::Node& n) { p.random_seed = scalar<std::uint64_t>(n, "seed"); });
    set("grounding_jaccard", [&](const YAML::Node& n) { p.grounding_jaccard = scalar<double>(n, "grounding_jaccard"); });
    set("overall_mode", [&](const YAML::Node& n) {
        const auto v = scalar<std::string>(n, "overall_mode");
        if (v == "per_sentiment") p.overall_mode = OverallMode::per_sentiment;
        else if (v == "mixed") p.overall_mode = OverallMode::mixed;
        else throw InputError("config: overall_mode must be per_sentiment or mixed");
    });
    set("thresholds", [&](const YAML::Node& n) {
        check_keys(n, "thresholds.", {"sem_replace", "sem_l4_topic", "sem_l4_verbatim"});
        if (n["sem_replace"]) p.thresholds.sem_replace = scalar<double>(n["sem_replace"], "sem_replace");
        if (n["sem_l4_topic"]) p.thresholds.sem_l4_topic = scalar<double>(n["sem_l4_topic"], "sem_l4_topic");
        if (n["sem_l4_verbatim"]) p.thresholds.sem_l4_verbatim = scalar<double>(n["sem_l4_verbatim"], "sem_l4_verbatim");
    });
    set("selection", [&](const YAML::Node& n) {
        check_keys(n, "selection.", {"strategy", "pool_size"});
        if (n["strategy"]) p.selection_strategy = parse_selection(scalar<std::string>(n["strategy"], "strategy"));
        if (n["pool_size"]) p.selection_pool_size = scalar<std::size_t>(n["pool_size"], "pool_size");
    });
    set("backend", [&](const YAML::Node& n) {
        check_keys(n, "backend.", {"kind", "endpoint", "embedding_endpoint", "embedding_dimension",
                                   "max_context_tokens", "single_flight", "record", "replay"});
        auto& b = cfg.backend;
        if (n["kind"]) b.kind = parse_backend(scalar<std::string>(n["kind"], "backend.kind"));
        if (n["endpoint"]) b.endpoint = scalar<std::string>(n["endpoint"], "backend.endpoint");
        if (n["embedding_endpoint"]) b.embedding_endpoint = scalar<std::string>(n["embedding_endpoint"], "backend.embedding_endpoint");
        if (n["embedding_dimension"]) b.embedding_dimension = scalar<std::size_t>(n["embedding_dimension"], "backend.embedding_dimension");
        if (n["max_context_tokens"]) b.max_context_tokens = scalar<std::size_t>(n["max_context_tokens"], "backend.max_context_tokens");
        if (n["single_flight"]) b.single_flight = scalar<bool>(n["single_flight"], "backend.single_flight");
        if (n["record"]) b.record = scalar<std::string>(n["record"], "backend.record");
        if (n["replay"]) b.replay = scalar<std::string>(n["replay"], "backend.replay");
    });
    set("batching", [&](const YAML::Node& n) {
        check_keys(n, "batching.", {"enabled", "max_batch", "max_wait_ms", "max_in_flight"});
        auto& b = cfg.batching;
        if (n["enabled"]) b.enabled = scalar<bool>(n["enabled"], "batching.enabled");
        if (n["max_batch"]) b.max_batch = scalar<std::size_t>(n["max_batch"], "batching.max_batch");
        if (n["max_wait_ms"]) b.max_wait_us = static_cast<std::size_t>(scalar<double>(n["max_wait_ms"], "batching.max_wait_ms") * 1000.0);
        if (n["max_in_flight"]) b.max_in_flight = scalar<std::size_t>(n["max_in_flight"], "batching.max_in_flight");
    });
    set("data_dir", [&](const YAML::Node& n) { cfg.data_dir = scalar<std::string>(n, "data_dir"); });
    set("prompts_dir", [&](const YAML::Node& n) { cfg.prompts_dir = scalar<std::string>(n, "prompts_dir"); });
    set("mock_latency_ms", [&](const YAML::Node& n) {
        cfg.mock_latency_us = static_cast<std::size_t>(scalar<double>(n, "mock_latency_ms") * 1000.0);
    });
}

void apply_file(AppConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_yaml(cfg, ss.str());
}

void apply_env(AppConfig& cfg) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    if (auto v = env("MARS_SEED")) {
        try {
            cfg.pipeline.random_seed = std::stoull(*v);
        } catch (const std::exception&) {
            throw InputError("MARS_SEED is not an integer");
        }
        cfg.sources["seed"] = "env";
    }
    if (auto v = env("MARS_TARGET_LANG")) {
        cfg.pipeline.target_language = parse_language(*v);
        cfg.sources["target_language"] = "env";
    }
    if (auto v = env("MARS_BACKEND")) {
        cfg.backend.kind = parse_backend(*v);
        cfg.sources["backend"] = "env";
    }
    if (auto v = env("MARS_ENDPOINT")) {
        cfg.backend.endpoint = *v;
        cfg.sources["backend"] = "env";
    }
    if (auto v = env("MARS_EMBEDDING_ENDPOINT")) {
        cfg.backend.embedding_endpoint = *v;
        cfg.sources["backend"] = "env";
    }
    if (auto v = env("MARS_API_KEY")) cfg.backend.api_key = *v;
    if (auto v = env("MARS_DATA_DIR")) {
        cfg.data_dir = *v;
        cfg.sources["data_dir"] = "env";
    }
}

std::string describe(const AppConfig& cfg) {
    const auto& p = cfg.pipeline;
    auto src = [&](const std::string& key) {
        const auto it = cfg.sources.find(key);
        return it == cfg.sources.end() ? std::string("default") : it->second;
    };
    std::ostringstream os;
    os << "target_language  = " << to_string(p.target_language) << "  (" << src("target_language") << ")\n"
       << "context_length   = " << p.context_length << "  (" << src("context_length") << ")\n"
       << "top_aspect_count = " << p.top_aspect_count << "  (" << src("top_aspect_count") << ")\n"
       << "words_per_aspect = " << p.words_per_aspect << "  (" << src("words_per_aspect") << ")\n"
       << "thresholds       = " << p.thresholds.sem_replace << " / " << p.thresholds.sem_l4_topic << " / "
       << p.thresholds.sem_l4_verbatim << "  (" << src("thresholds") << ")\n"
       << "selection        = " << to_string(p.selection_strategy) << ", k=" << p.selection_pool_size << "  ("
       << src("selection") << ")\n"
       << "seed             = " << p.random_seed << "  (" << src("seed") << ")\n"
       << "overall_mode     = " << (p.overall_mode == OverallMode::mixed ? "mixed" : "per_sentiment") << "  ("
       << src("overall_mode") << ")\n"
       << "backend          = " << to_string(cfg.backend.kind) << "  (" << src("backend") << ")\n"
       << "batching         = " << (cfg.batching.enabled ? "on" : "off") << ", max_batch=" << cfg.batching.max_batch
       << ", max_wait_us=" << cfg.batching.max_wait_us << ", in_flight=" << cfg.batching.max_in_flight << "  ("
       << src("batching") << ")\n"
       << "data_dir         = " << cfg.data_dir.string() << "  (" << src("data_dir") << ")\n";
    return os.str();
}

Runtime::Runtime(const AppConfig& cfg, const Taxonomy& taxonomy) {
    cfg.pipeline.validate();
    const auto prompts_dir = cfg.prompts_dir.value_or(cfg.data_dir / "prompts");
    prompts_ = gateway::PromptSet::load(prompts_dir);

    const auto& b = cfg.backend;
    if (cfg.backend.replay) {
        base_ = std::make_unique<gateway::ReplayBackend>(*b.replay, b.max_context_tokens);
    } else {
        switch (b.kind) {
            case BackendKind::mock: {
                gateway::MockOptions opt;
                opt.max_context_tokens = b.max_context_tokens;
                opt.call_latency = std::chrono::microseconds(cfg.mock_latency_us);
                opt.single_flight = b.single_flight;
                base_ = std::make_unique<gateway::MockBackend>(prompts_, taxonomy,
                                                               gateway::MockData::load(cfg.data_dir / "mock"), opt);
                break;
            }
            case BackendKind::remote:
                if (b.endpoint.empty()) throw InputError("remote backend needs an endpoint (MARS_ENDPOINT)");
                base_ = std::make_unique<gateway::HttpBackend>(gateway::HttpEndpoint{b.endpoint, b.api_key},
                                                               b.max_context_tokens, b.single_flight);
                break;
            case BackendKind::replay:
                throw InputError("replay backend needs a cassette (--replay FILE)");
        }
    }
    front_ = base_.get();
    if (b.record) {
        recorder_ = std::make_unique<gateway::RecordingBackend>(*base_, *b.record);
        front_ = recorder_.get();
    }

    if (!b.embedding_endpoint.empty()) {
        raw_embeddings_ = std::make_unique<gateway::HttpEmbeddingProvider>(
            gateway::HttpEndpoint{b.embedding_endpoint, b.api_key}, b.embedding_dimension);
    } else {
        raw_embeddings_ = std::make_unique<HashEmbeddingProvider>(b.embedding_dimension, cfg.pipeline.random_seed);
    }
    embeddings_ = std::make_unique<CachingEmbeddingProvider>(*raw_embeddings_);

    if (cfg.batching.enabled) {
        gateway::DispatchOptions d;
        d.max_batch = cfg.batching.max_batch;
        d.max_wait = std::chrono::microseconds(cfg.batching.max_wait_us);
        d.max_in_flight = cfg.batching.max_in_flight;
        gateway_ = std::make_unique<gateway::Gateway>(*front_, d);
    } else {
        gateway_ = std::make_unique<gateway::Gateway>(*front_);
    }
}

}  // namespace mars::config

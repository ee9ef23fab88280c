#include "mars/remote.hpp"

#include "httplib.h"
#include "json.hpp"

namespace mars::gateway {

namespace {

using nlohmann::json;

struct SplitUrl {
    std::string origin;  // scheme://host:port
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw InputError("endpoint url needs a scheme: " + url);
    if (url.compare(0, scheme, "http") != 0) throw InputError("only http:// endpoints are supported: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

json post(const HttpEndpoint& ep, const json& body) {
    const auto [origin, path] = split_url(ep.url);
    httplib::Client client(origin);
    client.set_connection_timeout(ep.timeout);
    client.set_read_timeout(ep.timeout);
    client.set_write_timeout(ep.timeout);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError(ep.url + ": " + httplib::to_string(res.error()));
    if (res->status >= 500) throw TransportError(ep.url + ": HTTP " + std::to_string(res->status));
    if (res->status != 200) throw ContentError(ep.url + ": HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ContentError(ep.url + ": malformed response body: " + e.what());
    }
}

}  // namespace

HttpBackend::HttpBackend(HttpEndpoint endpoint, std::size_t max_context_tokens, bool single_flight)
    : endpoint_(std::move(endpoint)), max_context_tokens_(max_context_tokens), single_flight_(single_flight) {
    split_url(endpoint_.url);
}

std::vector<std::string> HttpBackend::generate(const std::vector<std::string>& prompts, const GenParams& params) {
    const json body{{"prompts", prompts},
                    {"params",
                     {{"max_output_tokens", params.max_output_tokens},
                      {"temperature", params.temperature},
                      {"stop", params.stop_sequences}}}};
    const json reply = post(endpoint_, body);
    if (!reply.contains("outputs") || !reply["outputs"].is_array()) {
        throw ContentError(endpoint_.url + ": response has no \"outputs\" array");
    }
    std::vector<std::string> out;
    for (const auto& o : reply["outputs"]) {
        if (!o.is_string()) throw ContentError(endpoint_.url + ": non-string output");
        out.push_back(o.get<std::string>());
    }
    if (out.size() != prompts.size()) {
        throw ContentError(endpoint_.url + ": " + std::to_string(out.size()) + " outputs for " +
                           std::to_string(prompts.size()) + " prompts");
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpoint endpoint, std::size_t dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {
    split_url(endpoint_.url);
}

std::vector<Vector> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    const json reply = post(endpoint_, json{{"texts", texts}});
    if (!reply.contains("embeddings") || !reply["embeddings"].is_array()) {
        throw ContentError(endpoint_.url + ": response has no \"embeddings\" array");
    }
    try {
        return reply["embeddings"].get<std::vector<Vector>>();
    } catch (const json::exception& e) {
        throw ContentError(endpoint_.url + ": malformed embeddings: " + e.what());
    }
}

RecordingBackend::RecordingBackend(GenerationBackend& inner, const std::filesystem::path& cassette)
    : inner_(inner) {
    if (cassette.has_parent_path()) std::filesystem::create_directories(cassette.parent_path());
    out_.open(cassette, std::ios::app);
    if (!out_) throw InputError("cannot open cassette " + cassette.string());
}

std::vector<std::string> RecordingBackend::generate(const std::vector<std::string>& prompts,
                                                    const GenParams& params) {
    auto outputs = inner_.generate(prompts, params);
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < prompts.size() && i < outputs.size(); ++i) {
        out_ << json{{"prompt", prompts[i]}, {"response", outputs[i]}}.dump() << '\n';
    }
    out_.flush();
    return outputs;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette, std::size_t max_context_tokens)
    : max_context_tokens_(max_context_tokens) {
    std::ifstream in(cassette);
    if (!in) throw InputError("cannot open cassette " + cassette.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            responses_.insert_or_assign(j.at("prompt").get<std::string>(), j.at("response").get<std::string>());
        } catch (const json::exception& e) {
            throw InputError(cassette.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
}

std::vector<std::string> ReplayBackend::generate(const std::vector<std::string>& prompts, const GenParams&) {
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) {
        const auto it = responses_.find(p);
        if (it == responses_.end()) throw ContentError("prompt not in cassette: " + p.substr(0, 60));
        out.push_back(it->second);
    }
    return out;
}

}  // namespace mars::gateway

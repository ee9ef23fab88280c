#include "mars/gateway.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <set>
#include <sstream>

namespace mars::gateway {

void GenParams::validate() const {
    if (max_output_tokens < 1) throw InputError("max_output_tokens must be >= 1");
    if (temperature < 0.0) throw InputError("temperature must be >= 0");
}

std::string_view to_string(TemplateName n) {
    switch (n) {
        case TemplateName::aspect_id: return "aspect_id";
        case TemplateName::sentiment: return "sentiment";
        case TemplateName::verbatim: return "verbatim";
        case TemplateName::translate: return "translate";
        case TemplateName::summarise: return "summarise";
    }
    return "aspect_id";
}

namespace {

bool is_ident(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

}  // namespace

PromptTemplate PromptTemplate::parse(TemplateName name, std::string text) {
    PromptTemplate t;
    t.name_ = name;
    t.text_ = std::move(text);
    const std::string& s = t.text_;
    std::string literal;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '{') {
            std::size_t j = i + 1;
            while (j < s.size() && is_ident(s[j])) ++j;
            if (j < s.size() && s[j] == '}' && j > i + 1) {
                if (!t.slots_.empty() && literal.empty()) {
                    throw InputError("template " + std::string(to_string(name)) + ": adjacent placeholders");
                }
                t.pieces_.push_back(std::move(literal));
                literal.clear();
                std::string ph = s.substr(i + 1, j - i - 1);
                if (std::find(t.placeholders_.begin(), t.placeholders_.end(), ph) == t.placeholders_.end()) {
                    t.placeholders_.push_back(ph);
                }
                t.slots_.push_back(std::move(ph));
                i = j + 1;
                continue;
            }
        }
        literal.push_back(s[i++]);
    }
    t.pieces_.push_back(std::move(literal));

    const auto ctx = std::find(t.slots_.begin(), t.slots_.end(), "context");
    if (ctx != t.slots_.end()) {
        const bool last = ctx + 1 == t.slots_.end();
        if (!last || !text::trim(t.pieces_.back()).empty()) {
            throw InputError("template " + std::string(to_string(name)) + ": {context} must close the template");
        }
    }
    return t;
}

std::string PromptTemplate::render(const Vars& vars) const {
    for (const auto& ph : placeholders_) {
        if (!vars.count(ph)) {
            throw InputError("template " + std::string(to_string(name_)) + ": missing placeholder {" + ph + "}");
        }
    }
    for (const auto& [key, value] : vars) {
        if (std::find(placeholders_.begin(), placeholders_.end(), key) == placeholders_.end()) {
            throw InputError("template " + std::string(to_string(name_)) + ": unexpected variable {" + key + "}");
        }
    }
    std::string out = pieces_.front();
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        out += vars.at(slots_[i]);
        out += pieces_[i + 1];
    }
    return out;
}

std::optional<Vars> PromptTemplate::match(std::string_view prompt) const {
    if (prompt.substr(0, pieces_.front().size()) != pieces_.front()) return std::nullopt;
    std::size_t pos = pieces_.front().size();
    Vars vars;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        const std::string& next = pieces_[i + 1];
        std::size_t end;
        if (i + 1 == slots_.size()) {
            if (prompt.size() < pos + next.size() || prompt.substr(prompt.size() - next.size()) != next) {
                return std::nullopt;
            }
            end = prompt.size() - next.size();
        } else {
            end = prompt.find(next, pos);
            if (end == std::string_view::npos) return std::nullopt;
        }
        std::string value(prompt.substr(pos, end - pos));
        if (auto it = vars.find(slots_[i]); it != vars.end() && it->second != value) return std::nullopt;
        vars[slots_[i]] = std::move(value);
        pos = end + next.size();
    }
    if (slots_.empty() && prompt.size() != pieces_.front().size()) return std::nullopt;
    return vars;
}

const std::string kSummariseTemplate =
    "Below is an instruction that describes a task, paired with an input that provides further context. "
    "Write a response that appropriately fulfills the request\n"
    "\n"
    "### Instruction: Generate a fluent descriptive within {word_count} words capturing top {aspect_count} "
    "{sentiment} aspects mentioned in input\n"
    "\n"
    "### Input: {percent_contribution}\n"
    "\n"
    "### Response:";

namespace {

const std::map<TemplateName, std::string>& builtin_texts() {
    static const std::map<TemplateName, std::string> texts = {
        {TemplateName::aspect_id,
         "Identify the granular aspects discussed in the customer review below. Answer in English with a "
         "comma-separated list of aspect names and nothing else.\n\nReview ({language}): {context}"},
        {TemplateName::sentiment,
         "Classify the sentiment the customer review below expresses about the aspect \"{aspect}\". Answer in "
         "English with exactly one word: positive, negative or both.\n\nReview ({language}): {context}"},
        {TemplateName::verbatim,
         "Copy the exact phrases from the customer review below that express a {sentiment} opinion about the "
         "aspect \"{aspect}\". Return one phrase per line, unchanged.\n\nReview ({language}): {context}"},
        {TemplateName::translate,
         "Translate each of the following {language} phrases into {target_language}. Return one translation "
         "per line, in the same order.\n\nPhrases:\n{verbatims}\n\nReview ({language}): {context}"},
        {TemplateName::summarise, kSummariseTemplate},
    };
    return texts;
}

}  // namespace

PromptSet PromptSet::builtin() {
    PromptSet set;
    for (const auto& [name, body] : builtin_texts()) set.templates_.emplace(name, PromptTemplate::parse(name, body));
    return set;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    PromptSet set = builtin();
    for (auto name : kAllTemplates) {
        if (name == TemplateName::summarise) continue;
        const auto path = dir / (std::string(to_string(name)) + ".txt");
        std::ifstream in(path);
        if (!in) continue;
        std::stringstream ss;
        ss << in.rdbuf();
        std::string body = ss.str();
        if (!body.empty() && body.back() == '\n') body.pop_back();
        set.templates_.insert_or_assign(name, PromptTemplate::parse(name, std::move(body)));
    }
    return set;
}

const PromptTemplate& PromptSet::get(TemplateName n) const { return templates_.at(n); }

std::optional<TemplateName> PromptSet::detect(std::string_view prompt) const {
    std::optional<TemplateName> best;
    std::size_t best_len = 0;
    for (const auto& [name, t] : templates_) {
        const auto marker = t.marker();
        if (!marker.empty() && prompt.substr(0, marker.size()) == marker && marker.size() > best_len) {
            best = name;
            best_len = marker.size();
        }
    }
    return best;
}

// --- Dispatcher ------------------------------------------------------------

Dispatcher::Dispatcher(GenerationBackend& backend, DispatchOptions options)
    : backend_(backend), options_(std::move(options)) {
    if (options_.max_batch < 1) throw InputError("max_batch must be >= 1");
    if (options_.max_in_flight < 1) throw InputError("max_in_flight must be >= 1");
    const std::size_t workers = backend_.single_flight() ? 1 : options_.max_in_flight;
    for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { worker(); });
}

Dispatcher::~Dispatcher() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
}

void Dispatcher::check_budget(const std::string& prompt) const {
    const std::size_t tokens = options_.token_counter(prompt);
    if (tokens > backend_.max_context_tokens()) {
        throw PromptTooLong("prompt of " + std::to_string(tokens) + " tokens exceeds backend context of " +
                            std::to_string(backend_.max_context_tokens()));
    }
}

std::future<std::string> Dispatcher::submit(std::string prompt, const GenParams& params) {
    std::vector<std::string> one;
    one.push_back(std::move(prompt));
    return std::move(submit_many(std::move(one), params).front());
}

std::vector<std::future<std::string>> Dispatcher::submit_many(std::vector<std::string> prompts,
                                                             const GenParams& params) {
    params.validate();
    for (const auto& p : prompts) check_budget(p);
    std::vector<std::future<std::string>> futures;
    futures.reserve(prompts.size());
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        for (auto& p : prompts) {
            Request r{std::move(p), params, {}, now};
            futures.push_back(r.result.get_future());
            queue_.push_back(std::move(r));
        }
    }
    cv_.notify_all();
    return futures;
}

DispatchStats Dispatcher::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

void Dispatcher::worker() {
    std::unique_lock lock(mutex_);
    for (;;) {
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;  // stopping and drained

        const GenParams head_params = queue_.front().params;
        const auto deadline = queue_.front().enqueued + options_.max_wait;
        auto ready = [&] {
            std::size_t same = 0;
            for (const auto& r : queue_) same += r.params == head_params ? 1 : 0;
            return same >= options_.max_batch;
        };
        while (!stopping_ && !queue_.empty() && !ready() && std::chrono::steady_clock::now() < deadline) {
            cv_.wait_until(lock, deadline);
        }
        if (queue_.empty() || !(queue_.front().params == head_params)) continue;

        std::vector<Request> batch;
        for (auto it = queue_.begin(); it != queue_.end() && batch.size() < options_.max_batch;) {
            if (it->params == head_params) {
                batch.push_back(std::move(*it));
                it = queue_.erase(it);
            } else {
                ++it;
            }
        }
        ++stats_.batches;
        stats_.largest_batch = std::max(stats_.largest_batch, batch.size());
        lock.unlock();
        execute(batch);
        lock.lock();
    }
}

std::vector<std::string> Dispatcher::call_backend(const std::vector<std::string>& prompts, const GenParams& params) {
    for (const auto& p : prompts) {
        assert(options_.token_counter(p) <= backend_.max_context_tokens());
        (void)p;
    }
    {
        std::lock_guard lock(mutex_);
        ++stats_.backend_calls;
    }
    auto out = backend_.generate(prompts, params);
    if (out.size() != prompts.size()) {
        throw ContentError("backend returned " + std::to_string(out.size()) + " outputs for " +
                           std::to_string(prompts.size()) + " prompts");
    }
    return out;
}

void Dispatcher::execute(std::vector<Request>& batch) {
    std::vector<std::string> prompts;
    prompts.reserve(batch.size());
    for (const auto& r : batch) prompts.push_back(r.prompt);
    const GenParams params = batch.front().params;

    try {
        auto out = call_backend(prompts, params);
        for (std::size_t i = 0; i < batch.size(); ++i) batch[i].result.set_value(std::move(out[i]));
        return;
    } catch (const TransportError&) {
        // fall through to the solo pass below
    } catch (const ContentError& e) {
        if (batch.size() == 1) {
            batch.front().result.set_exception(std::current_exception());
            return;
        }
    } catch (...) {
        for (auto& r : batch) r.result.set_exception(std::current_exception());
        return;
    }

    // One solo attempt per request isolates the failing member. For a batch
    // of one this is the single transport retry.
    for (auto& r : batch) {
        {
            std::lock_guard lock(mutex_);
            ++stats_.solo_retries;
        }
        try {
            auto out = call_backend({r.prompt}, params);
            r.result.set_value(std::move(out.front()));
        } catch (...) {
            r.result.set_exception(std::current_exception());
        }
    }
}

std::vector<std::string> dispatch_batched(const std::vector<std::string>& prompts, const GenParams& params,
                                          Dispatcher& dispatcher) {
    auto futures = dispatcher.submit_many(prompts, params);
    std::vector<std::string> out;
    out.reserve(futures.size());
    std::exception_ptr first;
    for (auto& f : futures) {
        try {
            out.push_back(f.get());
        } catch (...) {
            if (!first) first = std::current_exception();
            out.emplace_back();
        }
    }
    if (first) std::rethrow_exception(first);
    return out;
}

// --- Gateway ---------------------------------------------------------------

Gateway::Gateway(GenerationBackend& backend, GenParams params) : backend_(backend), params_(std::move(params)) {
    params_.validate();
}

Gateway::Gateway(GenerationBackend& backend, DispatchOptions options, GenParams params)
    : backend_(backend), params_(std::move(params)) {
    params_.validate();
    dispatcher_.emplace(backend_, std::move(options));
}

std::string Gateway::complete(const std::string& prompt) { return complete_all({prompt}).front(); }

std::vector<std::string> Gateway::complete_all(const std::vector<std::string>& prompts) {
    if (prompts.empty()) return {};
    prompts_sent_ += prompts.size();
    if (dispatcher_) return dispatch_batched(prompts, params_, *dispatcher_);

    for (const auto& p : prompts) {
        const std::size_t tokens = text::whitespace_token_count(p);
        if (tokens > backend_.max_context_tokens()) {
            throw PromptTooLong("prompt of " + std::to_string(tokens) + " tokens exceeds backend context of " +
                                std::to_string(backend_.max_context_tokens()));
        }
    }
    std::unique_lock<std::mutex> lock(direct_mutex_, std::defer_lock);
    if (backend_.single_flight()) lock.lock();
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) {
        auto call = [&] {
            auto one = backend_.generate({p}, params_);
            if (one.size() != 1) throw ContentError("backend output count mismatch");
            return std::move(one.front());
        };
        try {
            out.push_back(call());
        } catch (const TransportError&) {
            out.push_back(call());
        }
    }
    return out;
}

}  // namespace mars::gateway

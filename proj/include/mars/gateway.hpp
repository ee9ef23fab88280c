#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mars/model.hpp"
#include "mars/text.hpp"

namespace mars::gateway {

struct GenParams {
    std::size_t max_output_tokens = 256;
    double temperature = 0.0;  // 0 requests deterministic decoding
    std::vector<std::string> stop_sequences;

    bool operator==(const GenParams&) const = default;
    void validate() const;
};

/// A text generator. generate() returns one output per prompt, in order.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::vector<std::string> generate(const std::vector<std::string>& prompts, const GenParams& params) = 0;
    virtual std::size_t max_context_tokens() const = 0;
    /// True when the backend cannot take concurrent generate() calls.
    virtual bool single_flight() const { return false; }
};

/// A prompt longer than the backend's context window; rejected before dispatch.
class PromptTooLong : public ContentError {
public:
    using ContentError::ContentError;
};

enum class TemplateName { aspect_id, sentiment, verbatim, translate, summarise };

inline constexpr std::array<TemplateName, 5> kAllTemplates{TemplateName::aspect_id, TemplateName::sentiment,
                                                           TemplateName::verbatim, TemplateName::translate,
                                                           TemplateName::summarise};

std::string_view to_string(TemplateName n);

using Vars = std::map<std::string, std::string>;

/// Template text with `{name}` placeholders. A `{context}` placeholder, when
/// present, must close the template so the review is always appended last.
class PromptTemplate {
public:
    static PromptTemplate parse(TemplateName name, std::string text);

    TemplateName name() const { return name_; }
    const std::string& text() const { return text_; }
    /// Distinct placeholder names in order of first appearance.
    const std::vector<std::string>& placeholders() const { return placeholders_; }
    /// Literal text before the first placeholder; identifies the phase.
    std::string_view marker() const { return pieces_.front(); }

    /// Throws InputError naming any missing or unexpected variable.
    std::string render(const Vars& vars) const;
    /// Inverse of render for prompts this template produced.
    std::optional<Vars> match(std::string_view prompt) const;

private:
    TemplateName name_ = TemplateName::aspect_id;
    std::string text_;
    std::vector<std::string> placeholders_;
    std::vector<std::string> pieces_;   // literals; pieces_.size() == slots_.size() + 1
    std::vector<std::string> slots_;    // placeholder per slot, repeats allowed
};

/// The summarisation prompt, verbatim.
extern const std::string kSummariseTemplate;

/// The five templates of the protocol.
class PromptSet {
public:
    /// Compiled-in defaults.
    static PromptSet builtin();
    /// Phase templates from `<dir>/<name>.txt` where present (one trailing
    /// newline stripped); the summarise template is always the built-in one.
    static PromptSet load(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateName n) const;
    /// Phase whose marker the prompt starts with.
    std::optional<TemplateName> detect(std::string_view prompt) const;

private:
    std::map<TemplateName, PromptTemplate> templates_;
};

struct DispatchOptions {
    std::size_t max_batch = 64;
    std::chrono::microseconds max_wait{10'000};
    std::size_t max_in_flight = 4;
    text::TokenCounter token_counter = text::whitespace_counter();
};

struct DispatchStats {
    std::size_t backend_calls = 0;
    std::size_t batches = 0;
    std::size_t largest_batch = 0;
    std::size_t solo_retries = 0;
};

/// Client-side dynamic batching. Requests from any thread are queued; workers
/// coalesce requests with equal GenParams into batches of up to max_batch,
/// waiting at most max_wait after the oldest request. At most max_in_flight
/// batches run at once (1 for single-flight backends). A failed batch is
/// split and each request retried once on its own.
class Dispatcher {
public:
    Dispatcher(GenerationBackend& backend, DispatchOptions options = {});
    ~Dispatcher();

    Dispatcher(const Dispatcher&) = delete;
    Dispatcher& operator=(const Dispatcher&) = delete;

    std::future<std::string> submit(std::string prompt, const GenParams& params);
    /// Enqueues all prompts atomically, so they batch together.
    std::vector<std::future<std::string>> submit_many(std::vector<std::string> prompts, const GenParams& params);

    DispatchStats stats() const;
    const DispatchOptions& options() const { return options_; }

private:
    struct Request {
        std::string prompt;
        GenParams params;
        std::promise<std::string> result;
        std::chrono::steady_clock::time_point enqueued;
    };

    void check_budget(const std::string& prompt) const;
    void worker();
    void execute(std::vector<Request>& batch);
    std::vector<std::string> call_backend(const std::vector<std::string>& prompts, const GenParams& params);

    GenerationBackend& backend_;
    DispatchOptions options_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Request> queue_;
    bool stopping_ = false;
    DispatchStats stats_;
    std::vector<std::thread> workers_;
};

/// Submits all prompts and waits; rethrows the first failure.
std::vector<std::string> dispatch_batched(const std::vector<std::string>& prompts, const GenParams& params,
                                          Dispatcher& dispatcher);

/// Entry point the pipeline uses: either direct calls or through a Dispatcher.
class Gateway {
public:
    /// Direct mode: one backend call per prompt, issued in order (one retry on
    /// transport errors).
    explicit Gateway(GenerationBackend& backend, GenParams params = {});
    /// Batched mode.
    Gateway(GenerationBackend& backend, DispatchOptions options, GenParams params = {});

    std::string complete(const std::string& prompt);
    std::vector<std::string> complete_all(const std::vector<std::string>& prompts);

    const GenParams& params() const { return params_; }
    std::size_t prompts_sent() const { return prompts_sent_.load(); }
    const Dispatcher* dispatcher() const { return dispatcher_ ? &*dispatcher_ : nullptr; }

private:
    GenerationBackend& backend_;
    GenParams params_;
    std::optional<Dispatcher> dispatcher_;
    std::mutex direct_mutex_;  // serialises direct calls to single-flight backends
    std::atomic<std::size_t> prompts_sent_{0};
};

}  // namespace mars::gateway

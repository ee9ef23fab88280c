#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "mars/corpus.hpp"
#include "mars/remote.hpp"
#include "support.hpp"

using namespace mars;
using namespace mars::gateway;

namespace {

Vars review_vars(const std::string& context, const std::string& aspect = "") {
    Vars v{{"language", "English"}, {"context", context}};
    if (!aspect.empty()) v["aspect"] = aspect;
    return v;
}

class FlakyBackend : public GenerationBackend {
public:
    std::vector<std::string> generate(const std::vector<std::string>& prompts, const GenParams&) override {
        ++calls;
        for (const auto& p : prompts) {
            if (p == "poison" && prompts.size() > 1) throw TransportError("batch failed");
            if (p == "poison") throw ContentError("bad prompt");
            if (p == "transient" && transient_failures > 0) {
                --transient_failures;
                throw TransportError("blip");
            }
        }
        std::vector<std::string> out;
        for (const auto& p : prompts) out.push_back("ok:" + p);
        return out;
    }
    std::size_t max_context_tokens() const override { return 100; }

    std::atomic<int> calls{0};
    std::atomic<int> transient_failures{0};
};

}  // namespace

TEST_CASE("template parse and render") {
    const auto set = PromptSet::builtin();
    const auto& s = set.get(TemplateName::summarise);
    CHECK(s.text() == kSummariseTemplate);
    const auto out = s.render({{"word_count", "10"}, {"aspect_count", "3"}, {"sentiment", "positive"},
                               {"percent_contribution", "..."}});
    CHECK(out.find("within 10 words") != std::string::npos);
    CHECK(out.find("top 3 positive aspects") != std::string::npos);
    CHECK_THROWS_WITH_AS(s.render({{"word_count", "10"}, {"aspect_count", "3"}, {"percent_contribution", "x"}}),
                         doctest::Contains("sentiment"), InputError);
    CHECK_THROWS_AS(s.render({{"word_count", "10"}, {"aspect_count", "3"}, {"sentiment", "x"},
                              {"percent_contribution", "x"}, {"extra", "y"}}),
                    InputError);

    const auto plain = PromptTemplate::parse(TemplateName::aspect_id, "no placeholders {Not} here");
    CHECK(plain.render({}) == "no placeholders {Not} here");
    CHECK_THROWS_AS(PromptTemplate::parse(TemplateName::aspect_id, "{a}{b}"), InputError);
    CHECK_THROWS_AS(PromptTemplate::parse(TemplateName::aspect_id, "{context} then more"), InputError);
}

TEST_CASE("context is appended last") {
    const auto set = PromptSet::builtin();
    for (auto n : {TemplateName::aspect_id, TemplateName::sentiment, TemplateName::verbatim, TemplateName::translate}) {
        const auto& t = set.get(n);
        CHECK(t.placeholders().back() == "context");
        Vars v;
        for (const auto& p : t.placeholders()) v[p] = "<" + p + ">";
        const auto r = t.render(v);
        CHECK(r.size() >= 9);
        CHECK(r.substr(r.size() - 9) == "<context>");
    }
}

TEST_CASE("match inverts render") {
    const auto set = PromptSet::builtin();
    const auto& t = set.get(TemplateName::translate);
    const Vars v{{"language", "French"},
                 {"target_language", "English"},
                 {"verbatims", "bon prix\nservice rapide"},
                 {"context", "bon prix et service rapide. Review (x): {odd}"}};
    const auto m = t.match(t.render(v));
    REQUIRE(m);
    CHECK(*m == v);
    CHECK_FALSE(t.match("unrelated"));
    CHECK(set.detect(t.render(v)) == TemplateName::translate);
    CHECK_FALSE(set.detect("hello"));
}

TEST_CASE("prompt set loads from the data directory") {
    const auto set = PromptSet::load(test::data_dir() / "prompts");
    const auto builtin = PromptSet::builtin();
    for (auto n : kAllTemplates) CHECK(set.get(n).text() == builtin.get(n).text());

    test::TempDir dir("prompts");
    std::ofstream(dir / "sentiment.txt") << "Sentiment of {aspect}? {context}\n";
    std::ofstream(dir / "summarise.txt") << "ignored {context}\n";
    const auto custom = PromptSet::load(dir.path());
    CHECK(custom.get(TemplateName::sentiment).text() == "Sentiment of {aspect}? {context}");
    CHECK(custom.get(TemplateName::summarise).text() == kSummariseTemplate);
}

TEST_CASE("dispatcher counts and order") {
    test::EchoBackend echo;
    Dispatcher d(echo, {64, std::chrono::microseconds(5000), 4});
    std::vector<std::string> prompts;
    for (int i = 0; i < 600; ++i) prompts.push_back("p" + std::to_string(i));
    const auto out = dispatch_batched(prompts, {}, d);
    REQUIRE(out.size() == 600);
    for (int i = 0; i < 600; ++i) CHECK(out[i] == "out:p" + std::to_string(i));
    CHECK(echo.calls == 10);
    CHECK(d.stats().largest_batch == 64);

    test::EchoBackend one;
    Dispatcher d1(one);
    CHECK(dispatch_batched({"only"}, {}, d1) == std::vector<std::string>{"out:only"});
    CHECK(one.calls == 1);
    CHECK(dispatch_batched({}, {}, d1).empty());
    CHECK(one.calls == 1);
}

TEST_CASE("dispatcher rejects oversize prompts") {
    test::EchoBackend echo;
    Dispatcher d(echo);
    std::string big;
    for (int i = 0; i < 1001; ++i) big += "w ";
    CHECK_THROWS_AS(d.submit(big, {}).get(), PromptTooLong);
    CHECK(echo.calls == 0);
}

TEST_CASE("failed batch is retried solo") {
    FlakyBackend b;
    Dispatcher d(b, {8, std::chrono::microseconds(20000), 1});
    auto futs = d.submit_many({"a", "poison", "c"}, {});
    CHECK(futs[0].get() == "ok:a");
    CHECK_THROWS_AS(futs[1].get(), ContentError);
    CHECK(futs[2].get() == "ok:c");
    CHECK(d.stats().solo_retries == 3);
}

TEST_CASE("direct gateway") {
    FlakyBackend b;
    b.transient_failures = 1;
    Gateway g(b);
    CHECK(g.complete("transient") == "ok:transient");
    CHECK(b.calls == 2);
    CHECK_THROWS_AS(g.complete("poison"), ContentError);
    CHECK(b.calls == 3);
    b.calls = 0;
    CHECK(g.complete_all({"x", "y", "z"}) == std::vector<std::string>{"ok:x", "ok:y", "ok:z"});
    CHECK(b.calls == 3);
    b.transient_failures = 2;
    CHECK_THROWS_AS(g.complete("transient"), TransportError);
}

TEST_CASE("gen params") {
    GenParams p;
    p.max_output_tokens = 0;
    CHECK_THROWS_AS(p.validate(), InputError);
}

TEST_CASE("mock backend phases") {
    const auto set = PromptSet::builtin();
    const gateway::MockData& data = test::demo_mock_data();
    Taxonomy t({"Retail"},
               {{"Power", "Retail"}, {"Logistics", "Retail"}},
               {{"battery life", "Power", {"battery"}}, {"shipping", "Logistics", {"delivery"}}});
    MockBackend mock(set, t, data);
    const std::string c = "Great battery. Slow delivery";

    CHECK(mock.respond(set.get(TemplateName::aspect_id).render(review_vars(c))) == "battery life, shipping");
    CHECK(mock.respond(set.get(TemplateName::sentiment).render(review_vars(c, "battery life"))) == "positive");
    CHECK(mock.respond(set.get(TemplateName::sentiment).render(review_vars(c, "shipping"))) == "negative");
    auto vv = review_vars(c, "battery life");
    vv["sentiment"] = "positive";
    CHECK(mock.respond(set.get(TemplateName::verbatim).render(vv)) == "Great battery");

    const Vars tv{{"language", "English"}, {"target_language", "Spanish"}, {"verbatims", "great battery"}, {"context", c}};
    CHECK(mock.respond(set.get(TemplateName::translate).render(tv)) == "gran batería");
    const Vars same{{"language", "English"}, {"target_language", "English"}, {"verbatims", "Great battery!"}, {"context", c}};
    CHECK(mock.respond(set.get(TemplateName::translate).render(same)) == "Great battery!");

    CHECK(mock.respond(set.get(TemplateName::sentiment).render(review_vars("Great but slow", "battery life"))) == "both");
    CHECK_THROWS_AS(mock.respond("what phase is this"), ContentError);
}

TEST_CASE("mock summarise stays within word_count") {
    auto mock = test::demo_mock();
    const auto set = PromptSet::builtin();
    const Vars v{{"word_count", "10"}, {"aspect_count", "1"}, {"sentiment", "positive"},
                 {"percent_contribution", "alpha one two three\nbeta four five\ngamma six"}};
    const auto out = mock.respond(set.get(TemplateName::summarise).render(v));
    CHECK(text::whitespace_token_count(out) <= 10);
    CHECK(out.find("alpha") != std::string::npos);
    CHECK(out.find("beta") != std::string::npos);
    CHECK(out.find("gamma") != std::string::npos);
    CHECK(mock.respond(set.get(TemplateName::summarise).render(v)) == out);
}

TEST_CASE("mock counters and budget") {
    auto mock = test::demo_mock({.max_context_tokens = 5});
    CHECK_THROWS_AS(mock.generate({"one two three four five six"}, {}), PromptTooLong);
    mock.reset_counters();
    const auto set = PromptSet::builtin();
    auto small = test::demo_mock();
    small.generate({set.get(TemplateName::aspect_id).render(review_vars("Great battery")),
                    set.get(TemplateName::aspect_id).render(review_vars("Rude staff"))},
                   {});
    CHECK(small.calls() == 1);
    CHECK(small.prompts_seen() == 2);
}

TEST_CASE("language names") {
    CHECK(language_from_name("spanish") == LanguageCode::ES);
    CHECK(language_from_name("German") == LanguageCode::DE);
    CHECK(language_from_name("IT") == LanguageCode::IT);
    CHECK(find_word("great battery", "battery") == 6);
    CHECK(find_word("batteryless", "battery") == std::string::npos);
}

TEST_CASE("record and replay round trip") {
    test::TempDir dir("cassette");
    const auto set = PromptSet::builtin();
    auto mock = test::demo_mock();
    std::vector<std::string> prompts{set.get(TemplateName::aspect_id).render(review_vars("Great battery. Slow delivery")),
                                     set.get(TemplateName::aspect_id).render(review_vars("Rude staff"))};
    std::vector<std::string> recorded;
    {
        RecordingBackend rec(mock, dir / "c.jsonl");
        recorded = rec.generate(prompts, {});
    }
    ReplayBackend replay(dir / "c.jsonl");
    CHECK(replay.size() == 2);
    CHECK(replay.generate(prompts, {}) == recorded);
    CHECK_THROWS_WITH_AS(replay.generate({"never seen"}, {}), doctest::Contains("not in cassette"), ContentError);
}

TEST_CASE("http backend against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        if (req.get_header_value("Authorization") != "Bearer k") {
            res.status = 401;
            return;
        }
        const auto body = json::parse(req.body);
        json outputs = json::array();
        for (const auto& p : body.at("prompts")) outputs.push_back("echo " + p.get<std::string>());
        CHECK(body.at("params").at("max_output_tokens") == 256);
        res.set_content(json{{"outputs", outputs}}.dump(), "application/json");
    });
    server.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) { res.set_content("nope", "text/plain"); });
    server.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
        json embs = json::array();
        const auto body = json::parse(req.body);
        for (const auto& t : body.at("texts")) embs.push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
        res.set_content(json{{"embeddings", embs}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    HttpBackend ok({base + "/generate", "k"}, 4096);
    CHECK(ok.generate({"a", "b"}, {}) == std::vector<std::string>{"echo a", "echo b"});
    HttpBackend noauth({base + "/generate", ""}, 4096);
    CHECK_THROWS_AS(noauth.generate({"a"}, {}), ContentError);
    HttpBackend fail({base + "/fail", ""}, 4096);
    CHECK_THROWS_AS(fail.generate({"a"}, {}), TransportError);
    HttpBackend garbage({base + "/garbage", ""}, 4096);
    CHECK_THROWS_AS(garbage.generate({"a"}, {}), ContentError);
    HttpEmbeddingProvider emb({base + "/embed", ""}, 2);
    const auto vecs = emb.embed({"abc"});
    CHECK(vecs.at(0) == Vector{3.0, 1.0});
    HttpEmbeddingProvider wrong_dim({base + "/embed", ""}, 3);
    CHECK_THROWS_AS(checked_embed(wrong_dim, {"abc"}), BackendError);

    server.stop();
    th.join();
    HttpBackend down({base + "/generate", ""}, 4096, false);
    CHECK_THROWS_AS(down.generate({"a"}, {}), TransportError);
}

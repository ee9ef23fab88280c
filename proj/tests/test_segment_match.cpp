#include <cmath>

#include "doctest.h"
#include "mars/kernels.hpp"
#include "mars/matcher.hpp"
#include "mars/segmenter.hpp"
#include "support.hpp"

using namespace mars;

namespace {

std::vector<std::string> texts(const std::vector<segmenter::Segment>& segs) {
    std::vector<std::string> out;
    for (const auto& s : segs) out.push_back(s.text);
    return out;
}

Review en(const std::string& t) { return Review::make("r", "e", LanguageCode::EN, t); }

using V = std::vector<std::string>;

}  // namespace

TEST_CASE("sentence splitting") {
    CHECK(texts(segmenter::split_sentences(en("Great screen. Battery dies fast!"))) == V{"Great screen", "Battery dies fast"});
    CHECK(texts(segmenter::split_sentences(en("cheap but sturdy"))) == V{"cheap", "sturdy"});
    CHECK(texts(segmenter::split_sentences(en("love it"))) == V{"love it"});
    CHECK(texts(segmenter::split_sentences(en("Butter is not a delimiter"))) == V{"Butter is not a delimiter"});
    CHECK(texts(segmenter::split_sentences(en("ok BUT meh"))) == V{"ok", "meh"});
    CHECK(texts(segmenter::split_sentences(en("v1.2 works... sometimes"))) == V{"v1.2 works", "sometimes"});
}

TEST_CASE("phrase splitting") {
    auto phrases = [](const std::string& t, LanguageCode l = LanguageCode::EN) {
        const auto r = Review::make("r", "e", l, t);
        return texts(segmenter::split_phrases(segmenter::split_sentences(r).at(0)));
    };
    CHECK(phrases("fast delivery, great packaging and poor manual") == V{"fast delivery", "great packaging", "poor manual"});
    CHECK(phrases("great, loved it") == V{"great, loved it"});
    CHECK(phrases("bon prix et service rapide", LanguageCode::FR) == V{"bon prix", "service rapide"});
    CHECK(phrases("bon prix parce que service rapide", LanguageCode::FR) == V{"bon prix", "service rapide"});
}

TEST_CASE("segment composition") {
    CHECK(texts(segmenter::segment(en("Great screen. cheap but sturdy build, nice feel"))) ==
          V{"Great screen", "cheap", "sturdy build", "nice feel"});
    const auto de = Review::make("r", "e", LanguageCode::DE, "tolles Hotel, aber laute Zimmer");
    CHECK(texts(segmenter::segment(de)) == V{"tolles Hotel", "laute Zimmer"});
    const auto es = Review::make("r", "e", LanguageCode::ES, "¡Me encanta! ¿Precio? caro pero bueno");
    CHECK(texts(segmenter::segment(es)) == V{"Me encanta", "Precio", "caro", "bueno"});
}

TEST_CASE("segment spans index the review text") {
    const auto r = en("Great screen. cheap but sturdy build, nice feel");
    for (const auto& s : segmenter::segment(r)) {
        CHECK(r.text.substr(s.char_span.start, s.char_span.end - s.char_span.start) == s.text);
        CHECK(s.review_id == "r");
    }
}

TEST_CASE("rule table") {
    const auto& rules = segmenter::rules_for(LanguageCode::FR);
    CHECK(rules.min_phrase_words == 2);
    const auto j = segmenter::rules_to_json(rules);
    CHECK(j.at("language") == "FR");
    CHECK(j.dump().find("parce que") != std::string::npos);
}

TEST_CASE("cosine") {
    const std::vector<double> a{1, 2, 3}, x{1, 0}, y{0, 1}, d{1, 1};
    CHECK(kernels::cosine(a, a) == doctest::Approx(1.0));
    CHECK(kernels::cosine(x, y) == doctest::Approx(0.0));
    CHECK(std::abs(kernels::cosine(d, x) - 1.0 / std::sqrt(2.0)) < 1e-9);
    CHECK_THROWS_AS(kernels::cosine(a, x), std::invalid_argument);
    const std::vector<double> z{0, 0};
    CHECK_THROWS_AS(kernels::cosine(z, x), std::invalid_argument);
}

TEST_CASE("serial and omp kernels agree") {
    test::TempDir unused("k");
    HashEmbeddingProvider h(32, 3);
    std::vector<Vector> rows;
    for (int i = 0; i < 300; ++i) rows.push_back(h.embed_one("text " + std::to_string(i)));
    const auto m = kernels::Matrix::from_rows(rows);
    const auto s1 = kernels::serial::cosine_scores(m.row(5), m);
    const auto s2 = kernels::omp::cosine_scores(m.row(5), m);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-12));
    const auto c1 = kernels::serial::cosine_matrix(m, m);
    const auto c2 = kernels::omp::cosine_matrix(m, m);
    CHECK(c1.data == c2.data);

    std::vector<Review> reviews;
    for (int i = 0; i < 200; ++i)
        reviews.push_back(Review::make("r" + std::to_string(i), "e", LanguageCode::EN,
                                       "Great screen " + std::to_string(i) + ". cheap but sturdy build, nice feel"));
    const auto g1 = kernels::serial::segment_corpus(reviews);
    const auto g2 = kernels::omp::segment_corpus(reviews);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(texts(g1[i]) == texts(g2[i]));

    std::vector<Insight> ins(50);
    for (auto& i : ins) i.source_verbatims = {{"two words", LanguageCode::EN}};
    const auto t1 = kernels::serial::token_totals(reviews, ins);
    const auto t2 = kernels::omp::token_totals(reviews, ins);
    CHECK(t1.review_tokens == t2.review_tokens);
    CHECK(t1.verbatim_tokens == 100);
    CHECK(t2.verbatims == 50);
}

TEST_CASE("parallel_for rethrows") {
    std::vector<int> hit(100, 0);
    kernels::parallel_for(hit.size(), [&](std::size_t i) { hit[i] = 1; });
    CHECK(std::count(hit.begin(), hit.end(), 1) == 100);
    CHECK_THROWS_AS(kernels::parallel_for(10, [](std::size_t i) { if (i == 3) throw InputError("x"); }), InputError);
}

TEST_CASE("embedding providers") {
    HashEmbeddingProvider h(64, 1);
    CHECK(h.embed_one("price") == h.embed_one("price"));
    CHECK(kernels::cosine(h.embed_one("price"), h.embed_one("prices")) >
          kernels::cosine(h.embed_one("price"), h.embed_one("ambience")));
    HashEmbeddingProvider other(64, 2);
    CHECK(h.embed_one("price") != other.embed_one("price"));

    test::CountingEmbeddings counting(h);
    CachingEmbeddingProvider cache(counting);
    cache.embed({"a", "b", "a"});
    cache.embed({"a", "c"});
    CHECK(counting.texts_seen == 3);
    CHECK(cache.cached() == 3);

    TableEmbeddingProvider t({{"x", {1, 0}}, {"y", {0, 1}}});
    CHECK(t.dimension() == 2);
    CHECK_THROWS_AS(t.embed({"z"}), ContentError);
}

TEST_CASE("phi") {
    const std::vector<std::string> abc{"a", "b", "c"};
    const std::vector<double> s{0.2, 0.9, 0.4};
    CHECK(matcher::phi(abc, s).aspect == "b");
    CHECK(matcher::phi(abc, s).score == 0.9);
    const std::vector<std::string> ab{"a", "b"};
    const std::vector<double> tie{0.5, 0.5};
    CHECK(matcher::phi(ab, tie).aspect == "a");
    const std::vector<std::string> solo{"solo"};
    const std::vector<double> one{0.1};
    CHECK(matcher::phi(solo, one).aspect == "solo");
    CHECK_THROWS_AS(matcher::phi(std::span<const std::string>{}, std::span<const double>{}), std::invalid_argument);
    CHECK_THROWS_AS(matcher::phi(ab, one), std::invalid_argument);
}

TEST_CASE("syntactic match") {
    const auto& t = test::demo_taxonomy();
    auto hit = matcher::syntactic_match("Battery  Life", t);
    REQUIRE(hit);
    CHECK(hit->l3 == "battery life");
    CHECK(hit->by == matcher::MatchedBy::exact);
    hit = matcher::syntactic_match("battery", t);
    REQUIRE(hit);
    CHECK(hit->l3 == "battery life");
    CHECK(hit->by == matcher::MatchedBy::substring);
    CHECK_FALSE(matcher::syntactic_match("shipping speed", t));
    CHECK_FALSE(matcher::syntactic_match("life battery", t));

    Taxonomy shortest({"A"}, {{"B", "A"}}, {{"customer service team", "B", {"x"}}, {"customer service", "B", {"y"}}});
    CHECK(matcher::syntactic_match("service", shortest)->l3 == "customer service");
}

TEST_CASE("semantic scores with a fixed provider") {
    // price ~ prices, expensive ~ expensive keyword; decor/ambience orthogonal.
    TableEmbeddingProvider emb({{"price", {0.9, 0.1, 0, 0}},
                                {"prices", {1, 0, 0, 0}},
                                {"ambience", {0, 0, 1, 0}},
                                {"way too expensive", {0, 1, 0, 0.2}},
                                {"expensive", {0, 1, 0, 0}},
                                {"decor", {0, 0, 0, 1}}});
    Taxonomy t({"R"}, {{"P", "R"}}, {{"prices", "P", {"expensive"}}, {"ambience", "P", {"decor"}}});
    const auto s = matcher::semantic_scores("price", "way too expensive", t, emb);
    CHECK(s.aspect_t == "prices");
    CHECK(s.aspect_v == "prices");
    // brute force
    double best_t = -2, best_v = -2;
    std::string at, av;
    for (const auto& l3 : t.l3()) {
        const double ct = kernels::cosine(emb.embed({"price"})[0], emb.embed({l3.name})[0]);
        if (ct > best_t) best_t = ct, at = l3.name;
        for (const auto& k : l3.keywords) {
            const double cv = kernels::cosine(emb.embed({"way too expensive"})[0], emb.embed({k})[0]);
            if (cv > best_v) best_v = cv, av = l3.name;
        }
    }
    CHECK(s.score_t == doctest::Approx(best_t));
    CHECK(s.score_v == doctest::Approx(best_v));
    CHECK(at == s.aspect_t);
    CHECK(av == s.aspect_v);

    const auto same = matcher::semantic_scores("prices", "decor", t, emb);
    CHECK(same.score_t == doctest::Approx(1.0));
    CHECK(same.aspect_t == "prices");
    CHECK(same.aspect_v == "ambience");
}

TEST_CASE("decision table") {
    const MatchThresholds th;
    using matcher::OutcomeKind;
    CHECK(matcher::classify(0.96, 0.0, th) == OutcomeKind::existing_l3);
    CHECK(matcher::classify(0.80, 0.50, th) == OutcomeKind::new_l4);
    CHECK(matcher::classify(0.60, 0.90, th) == OutcomeKind::new_aspect);
    CHECK(matcher::classify(0.95, 0.90, th) == OutcomeKind::new_l4);
    CHECK(matcher::classify(0.70, 0.90, th) == OutcomeKind::new_aspect);
    CHECK(matcher::classify(0.80, 0.40, th) == OutcomeKind::new_aspect);
}

TEST_CASE("standardise") {
    const auto& t = test::demo_taxonomy();
    HashEmbeddingProvider h(64, 7);
    test::CountingEmbeddings counting(h);

    SUBCASE("syntactic hit issues no embedding call") {
        const auto o = matcher::standardise("battery", "great battery", t, counting, {});
        CHECK(o.kind == matcher::OutcomeKind::existing_l3);
        CHECK(o.resolved_aspect == "battery life");
        CHECK(counting.calls == 0);
    }
    SUBCASE("idempotent on L3 names") {
        for (const auto& l3 : t.l3()) CHECK(matcher::standardise(l3.name, "x", t, counting, {}).resolved_aspect == l3.name);
        CHECK(counting.calls == 0);
    }
    SUBCASE("semantic path and registry") {
        matcher::NewAspectRegistry reg;
        MatchThresholds th{0.99, 0.98, 0.97};
        const auto o = matcher::standardise("parking garage", "the parking garage was full", t, counting, th, &reg,
                                            {"e1", "r1"});
        CHECK(counting.calls > 0);
        CHECK(o.kind == matcher::OutcomeKind::new_aspect);
        CHECK(o.resolved_aspect == "parking garage");
        REQUIRE(reg.size() == 1);
        CHECK(reg.snapshot()[0].review_id == "r1");
    }
    SUBCASE("l4 branch parents on aspect_t") {
        TableEmbeddingProvider emb({{"late courier", {0.8, 0.6, 0}},
                                    {"shipping", {1, 0, 0}},
                                    {"prices", {0, 0, 1}},
                                    {"courier was late", {0, 1, 0}},
                                    {"courier", {0, 0.9, 0.43589}},
                                    {"cheap", {0, 0, 1}}});
        Taxonomy small({"R"}, {{"L", "R"}}, {{"shipping", "L", {"courier"}}, {"prices", "L", {"cheap"}}});
        const auto o = matcher::standardise("late courier", "courier was late", small, emb, {});
        CHECK(o.kind == matcher::OutcomeKind::new_l4);
        CHECK(o.parent_l3 == "shipping");
        CHECK(o.resolved_aspect == "late courier");
        CHECK(o.score_t == doctest::Approx(0.8));
    }
}

TEST_CASE("registry audit file") {
    test::TempDir dir("reg");
    {
        matcher::NewAspectRegistry reg(dir / "audit.jsonl");
        reg.append({"b", "e", "r2", "x", 0.1, 0.2});
        reg.append({"a", "e", "r1", "x", 0.1, 0.2});
        CHECK(reg.snapshot()[0].review_id == "r1");
    }
    CHECK(test::read_file(dir / "audit.jsonl").find("\"r2\"") != std::string::npos);
}

// Serial reference vs OpenMP kernels on synthetic inputs.

#include <benchmark/benchmark.h>

#include <random>

#include "mars/kernels.hpp"

namespace {

using namespace mars;

kernels::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    kernels::Matrix m{rows, cols, std::vector<double>(rows * cols)};
    for (auto& x : m.data) x = g(rng);
    return m;
}

std::vector<Review> random_reviews(std::size_t n) {
    static const char* words[] = {"great", "battery", "but", "slow", "delivery", "the", "screen", "is",
                                  "bright", "and", "sharp", "rude", "staff", "cheap", "price", "room"};
    std::mt19937_64 rng(11);
    std::vector<Review> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const auto len = 20 + rng() % 60;
        for (std::size_t w = 0; w < len; ++w) {
            if (w) text += (rng() % 9 == 0) ? ". " : (rng() % 7 == 0 ? ", " : " ");
            text += words[rng() % std::size(words)];
        }
        out.push_back(Review::make("r" + std::to_string(i), "e", LanguageCode::EN, text));
    }
    return out;
}

template <auto Fn>
void bm_cosine_scores(benchmark::State& st) {
    const auto keys = random_matrix(static_cast<std::size_t>(st.range(0)), 128, 1);
    const auto q = random_matrix(1, 128, 2);
    for (auto _ : st) benchmark::DoNotOptimize(Fn(q.row(0), keys));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void bm_cosine_matrix(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto a = random_matrix(n, 128, 3);
    const auto b = random_matrix(n, 128, 4);
    for (auto _ : st) benchmark::DoNotOptimize(Fn(a, b));
    st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

template <auto Fn>
void bm_segment_corpus(benchmark::State& st) {
    const auto reviews = random_reviews(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(Fn(reviews));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <auto Fn>
void bm_token_totals(benchmark::State& st) {
    const auto reviews = random_reviews(static_cast<std::size_t>(st.range(0)));
    std::vector<Insight> insights;
    for (const auto& r : reviews) {
        Insight i;
        i.review_id = r.review_id;
        i.source_verbatims = {{r.text.substr(0, 40), r.language}};
        insights.push_back(i);
    }
    for (auto _ : st) benchmark::DoNotOptimize(Fn(reviews, insights));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(bm_cosine_scores<kernels::serial::cosine_scores>)->Name("cosine_scores/serial")->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(bm_cosine_scores<kernels::omp::cosine_scores>)->Name("cosine_scores/omp")->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(bm_cosine_matrix<kernels::serial::cosine_matrix>)->Name("cosine_matrix/serial")->Arg(128)->Arg(512);
BENCHMARK(bm_cosine_matrix<kernels::omp::cosine_matrix>)->Name("cosine_matrix/omp")->Arg(128)->Arg(512);
BENCHMARK(bm_segment_corpus<kernels::serial::segment_corpus>)->Name("segment_corpus/serial")->Arg(1000)->Arg(10000);
BENCHMARK(bm_segment_corpus<kernels::omp::segment_corpus>)->Name("segment_corpus/omp")->Arg(1000)->Arg(10000);
BENCHMARK(bm_token_totals<kernels::serial::token_totals>)->Name("token_totals/serial")->Arg(10000);
BENCHMARK(bm_token_totals<kernels::omp::token_totals>)->Name("token_totals/omp")->Arg(10000);

BENCHMARK_MAIN();

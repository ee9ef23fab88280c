#pragma once

// Data-parallel inner loops of the pipeline. Each kernel exists twice: a
// plain serial reference (kept for tests and the kernel benchmark) and an
// OpenMP version. The unqualified entry points pick one by problem size.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mars/embedding.hpp"
#include "mars/model.hpp"
#include "mars/segmenter.hpp"

namespace mars::kernels {

/// Row-major dense matrix of embeddings.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    static Matrix from_rows(const std::vector<Vector>& rows);
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Cosine of u and v. Throws std::invalid_argument on dimension mismatch or
/// a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

struct TokenTotals {
    std::size_t review_tokens = 0;
    std::size_t reviews = 0;
    std::size_t verbatim_tokens = 0;
    std::size_t verbatims = 0;
};

namespace serial {
std::vector<double> cosine_scores(std::span<const double> query, const Matrix& keys);
Matrix cosine_matrix(const Matrix& a, const Matrix& b);
std::vector<std::vector<segmenter::Segment>> segment_corpus(std::span<const Review> reviews);
TokenTotals token_totals(std::span<const Review> reviews, std::span<const Insight> insights);
}  // namespace serial

namespace omp {
std::vector<double> cosine_scores(std::span<const double> query, const Matrix& keys);
Matrix cosine_matrix(const Matrix& a, const Matrix& b);
std::vector<std::vector<segmenter::Segment>> segment_corpus(std::span<const Review> reviews);
TokenTotals token_totals(std::span<const Review> reviews, std::span<const Insight> insights);
}  // namespace omp

std::vector<double> cosine_scores(std::span<const double> query, const Matrix& keys);
Matrix cosine_matrix(const Matrix& a, const Matrix& b);
std::vector<std::vector<segmenter::Segment>> segment_corpus(std::span<const Review> reviews);
TokenTotals token_totals(std::span<const Review> reviews, std::span<const Insight> insights);

/// Runs body(i) for i in [0, n) on the OpenMP pool (dynamic schedule). The
/// first exception thrown by any body is rethrown after the loop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Threads OpenMP would use; 1 when built without OpenMP.
int max_threads();

}  // namespace mars::kernels

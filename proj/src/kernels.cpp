#include "mars/kernels.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mars/text.hpp"

namespace mars::kernels {

namespace {

// Below these sizes the OpenMP fork/join costs more than it saves.
constexpr std::size_t kParallelScoreWork = 1 << 14;
constexpr std::size_t kParallelReviews = 64;

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        out[i] = norm(m.row(i));
        if (out[i] == 0.0) throw std::invalid_argument("cosine of a zero vector");
    }
    return out;
}

double clamp_unit(double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

void check_dims(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("cosine dimension mismatch");
}

std::size_t count_verbatim_tokens(const Insight& in) {
    std::size_t n = 0;
    for (const auto& v : in.source_verbatims) n += text::whitespace_token_count(v.text);
    return n;
}

}  // namespace

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    Matrix m;
    m.rows = rows.size();
    m.cols = rows.empty() ? 0 : rows.front().size();
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows) {
        check_dims(r.size(), m.cols);
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

double cosine(std::span<const double> u, std::span<const double> v) {
    check_dims(u.size(), v.size());
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine of a zero vector");
    return clamp_unit(dot(u, v) / (nu * nv));
}

namespace serial {

std::vector<double> cosine_scores(std::span<const double> query, const Matrix& keys) {
    check_dims(query.size(), keys.cols);
    const double nq = norm(query);
    if (nq == 0.0) throw std::invalid_argument("cosine of a zero vector");
    const auto nk = row_norms(keys);
    std::vector<double> out(keys.rows);
    for (std::size_t i = 0; i < keys.rows; ++i) out[i] = clamp_unit(dot(query, keys.row(i)) / (nq * nk[i]));
    return out;
}

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
    check_dims(a.cols, b.cols);
    const auto na = row_norms(a), nb = row_norms(b);
    Matrix out{a.rows, b.rows, std::vector<double>(a.rows * b.rows)};
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            out.data[i * b.rows + j] = clamp_unit(dot(a.row(i), b.row(j)) / (na[i] * nb[j]));
        }
    }
    return out;
}

std::vector<std::vector<segmenter::Segment>> segment_corpus(std::span<const Review> reviews) {
    std::vector<std::vector<segmenter::Segment>> out;
    out.reserve(reviews.size());
    for (const auto& r : reviews) out.push_back(segmenter::segment(r));
    return out;
}

TokenTotals token_totals(std::span<const Review> reviews, std::span<const Insight> insights) {
    TokenTotals t;
    for (const auto& r : reviews) t.review_tokens += text::whitespace_token_count(r.text);
    t.reviews = reviews.size();
    for (const auto& in : insights) {
        t.verbatim_tokens += count_verbatim_tokens(in);
        t.verbatims += in.source_verbatims.size();
    }
    return t;
}

}  // namespace serial

namespace omp {

std::vector<double> cosine_scores(std::span<const double> query, const Matrix& keys) {
    check_dims(query.size(), keys.cols);
    const double nq = norm(query);
    if (nq == 0.0) throw std::invalid_argument("cosine of a zero vector");
    const auto nk = row_norms(keys);
    std::vector<double> out(keys.rows);
    const auto rows = static_cast<std::ptrdiff_t>(keys.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        out[i] = clamp_unit(dot(query, keys.row(i)) / (nq * nk[i]));
    }
    return out;
}

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
    check_dims(a.cols, b.cols);
    const auto na = row_norms(a), nb = row_norms(b);
    Matrix out{a.rows, b.rows, std::vector<double>(a.rows * b.rows)};
    const auto rows = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            out.data[i * b.rows + j] = clamp_unit(dot(a.row(i), b.row(j)) / (na[i] * nb[j]));
        }
    }
    return out;
}

std::vector<std::vector<segmenter::Segment>> segment_corpus(std::span<const Review> reviews) {
    std::vector<std::vector<segmenter::Segment>> out(reviews.size());
    parallel_for(reviews.size(), [&](std::size_t i) { out[i] = segmenter::segment(reviews[i]); });
    return out;
}

TokenTotals token_totals(std::span<const Review> reviews, std::span<const Insight> insights) {
    std::size_t review_tokens = 0, verbatim_tokens = 0, verbatims = 0;
    const auto nr = static_cast<std::ptrdiff_t>(reviews.size());
    const auto ni = static_cast<std::ptrdiff_t>(insights.size());
#pragma omp parallel for reduction(+ : review_tokens) schedule(static)
    for (std::ptrdiff_t i = 0; i < nr; ++i) review_tokens += text::whitespace_token_count(reviews[i].text);
#pragma omp parallel for reduction(+ : verbatim_tokens, verbatims) schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) {
        verbatim_tokens += count_verbatim_tokens(insights[i]);
        verbatims += insights[i].source_verbatims.size();
    }
    return {review_tokens, reviews.size(), verbatim_tokens, verbatims};
}

}  // namespace omp

std::vector<double> cosine_scores(std::span<const double> query, const Matrix& keys) {
    return keys.rows * keys.cols >= kParallelScoreWork ? omp::cosine_scores(query, keys)
                                                       : serial::cosine_scores(query, keys);
}

Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
    return a.rows * b.rows * a.cols >= kParallelScoreWork ? omp::cosine_matrix(a, b) : serial::cosine_matrix(a, b);
}

std::vector<std::vector<segmenter::Segment>> segment_corpus(std::span<const Review> reviews) {
    return reviews.size() >= kParallelReviews ? omp::segment_corpus(reviews) : serial::segment_corpus(reviews);
}

TokenTotals token_totals(std::span<const Review> reviews, std::span<const Insight> insights) {
    return reviews.size() >= kParallelReviews ? omp::token_totals(reviews, insights)
                                              : serial::token_totals(reviews, insights);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    std::exception_ptr first;
    std::mutex mutex;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(mutex);
            if (!first) first = std::current_exception();
        }
    }
    if (first) std::rethrow_exception(first);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace mars::kernels

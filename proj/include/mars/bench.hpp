#pragma once

#include <chrono>
#include <ostream>
#include <string>
#include <vector>

#include "mars/gateway.hpp"

namespace mars::bench {

struct BenchResult {
    std::string scenario;  // batched | unbatched
    std::string axis;      // batch_size | input_length
    std::size_t value = 0;
    double mean_s = 0.0;   // per-item latency
    double p50_s = 0.0;
    double p95_s = 0.0;
    std::size_t n = 0;     // trials
    bool partial = false;
    std::string error;
};

struct MeasureOptions {
    bool batched = true;
    std::size_t max_batch = 64;
    std::chrono::microseconds max_wait{2000};
    std::size_t max_in_flight = 1;  // pinned so only batching differs
    std::size_t trials = 3;
};

/// Sends all prompts per trial and records wall time / prompts. Backend
/// failures end the run with partial = true.
BenchResult measure(gateway::GenerationBackend& backend, const std::vector<std::string>& prompts,
                    const MeasureOptions& options);

/// Percentile by linear interpolation between closest ranks.
double percentile(std::vector<double> values, double q);

inline const std::vector<std::size_t> kDefaultBatchSizes{5, 25, 50, 100, 200, 400, 600};
inline const std::vector<std::size_t> kDefaultInputLengths{287, 361, 408, 469, 525, 573};

struct SweepOptions {
    std::vector<std::size_t> batch_sizes = kDefaultBatchSizes;
    std::vector<std::size_t> input_lengths = kDefaultInputLengths;
    std::size_t trials = 3;
    std::size_t unbatched_sample = 16;  // unbatched items per trial
    std::size_t length_items = 16;      // items per input-length trial
    std::chrono::microseconds max_wait{2000};
};

/// Summarise-phase prompts with an input block of exactly `input_tokens`
/// whitespace tokens, distinct per index.
std::vector<std::string> synthetic_prompts(const gateway::PromptSet& prompts, std::size_t count,
                                           std::size_t input_tokens);

/// Batched vs unbatched per batch size, then per input length. Stops after
/// the first partial result.
std::vector<BenchResult> sweep(gateway::GenerationBackend& backend, const gateway::PromptSet& prompts,
                               const SweepOptions& options);

inline constexpr const char* kCsvHeader = "scenario,axis,value,mean_s,p50_s,p95_s,n";

void write_csv(std::ostream& out, const std::vector<BenchResult>& results);
/// Whitespace columns per axis: value, batched mean, unbatched mean.
void write_dat(std::ostream& out, const std::vector<BenchResult>& results);

}  // namespace mars::bench

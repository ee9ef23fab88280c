#include "mars/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>

namespace mars::bench {

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

BenchResult measure(gateway::GenerationBackend& backend, const std::vector<std::string>& prompts,
                    const MeasureOptions& options) {
    BenchResult r;
    r.scenario = options.batched ? "batched" : "unbatched";
    std::vector<double> per_item;
    if (!prompts.empty()) {
        try {
            for (std::size_t t = 0; t < options.trials; ++t) {
                std::optional<gateway::Gateway> gw;
                if (options.batched) {
                    gateway::DispatchOptions d;
                    d.max_batch = options.max_batch;
                    d.max_wait = options.max_wait;
                    d.max_in_flight = options.max_in_flight;
                    gw.emplace(backend, d);
                } else {
                    gw.emplace(backend);
                }
                const auto start = std::chrono::steady_clock::now();
                gw->complete_all(prompts);
                const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
                per_item.push_back(wall.count() / static_cast<double>(prompts.size()));
            }
        } catch (const BackendError& e) {
            r.partial = true;
            r.error = e.what();
        }
    }
    r.n = per_item.size();
    if (!per_item.empty()) {
        r.mean_s = std::accumulate(per_item.begin(), per_item.end(), 0.0) / static_cast<double>(per_item.size());
        r.p50_s = percentile(per_item, 0.5);
        r.p95_s = percentile(per_item, 0.95);
    }
    return r;
}

std::vector<std::string> synthetic_prompts(const gateway::PromptSet& prompts, std::size_t count,
                                           std::size_t input_tokens) {
    static const char* words[] = {"battery", "lasts", "long", "delivery", "was", "slow", "great", "price",
                                  "screen",  "bright", "staff", "rude",   "room",  "clean", "food", "tasty"};
    const auto& t = prompts.get(gateway::TemplateName::summarise);
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string block = "item" + std::to_string(i);
        for (std::size_t w = 1; w < input_tokens; ++w) {
            block += ' ';
            block += words[(i + w) % std::size(words)];
        }
        out.push_back(t.render({{"word_count", "10"},
                                {"aspect_count", "1"},
                                {"sentiment", "positive"},
                                {"percent_contribution", block}}));
    }
    return out;
}

std::vector<BenchResult> sweep(gateway::GenerationBackend& backend, const gateway::PromptSet& prompts,
                               const SweepOptions& options) {
    std::vector<BenchResult> out;
    auto push = [&](BenchResult r, const char* axis, std::size_t value) {
        r.axis = axis;
        r.value = value;
        out.push_back(std::move(r));
        return !out.back().partial;
    };

    for (std::size_t b : options.batch_sizes) {
        const auto items = synthetic_prompts(prompts, b, 12);
        MeasureOptions m;
        m.trials = options.trials;
        m.max_wait = options.max_wait;
        m.max_batch = b;
        if (!push(measure(backend, items, m), "batch_size", b)) return out;
        m.batched = false;
        const std::vector<std::string> sample(items.begin(),
                                              items.begin() + static_cast<std::ptrdiff_t>(
                                                                  std::min(items.size(), options.unbatched_sample)));
        if (!push(measure(backend, sample, m), "batch_size", b)) return out;
    }
    for (std::size_t len : options.input_lengths) {
        const auto items = synthetic_prompts(prompts, options.length_items, len);
        MeasureOptions m;
        m.trials = options.trials;
        m.max_wait = options.max_wait;
        m.max_batch = options.length_items;
        if (!push(measure(backend, items, m), "input_length", len)) return out;
        m.batched = false;
        if (!push(measure(backend, items, m), "input_length", len)) return out;
    }
    return out;
}

void write_csv(std::ostream& out, const std::vector<BenchResult>& results) {
    out << kCsvHeader << '\n';
    out << std::setprecision(6);
    for (const auto& r : results) {
        out << r.scenario << ',' << r.axis << ',' << r.value << ',' << r.mean_s << ',' << r.p50_s << ',' << r.p95_s
            << ',' << r.n << '\n';
    }
    for (const auto& r : results) {
        if (r.partial) out << "# partial: " << r.scenario << ' ' << r.axis << '=' << r.value << ": " << r.error << '\n';
    }
}

void write_dat(std::ostream& out, const std::vector<BenchResult>& results) {
    std::map<std::string, std::map<std::size_t, std::pair<double, double>>> table;
    std::vector<std::string> axes;
    for (const auto& r : results) {
        if (!table.count(r.axis)) axes.push_back(r.axis);
        auto& cell = table[r.axis][r.value];
        (r.scenario == "batched" ? cell.first : cell.second) = r.mean_s;
    }
    out << std::setprecision(6);
    for (const auto& axis : axes) {
        out << "# " << axis << " batched_mean_s unbatched_mean_s\n";
        for (const auto& [value, cell] : table[axis]) out << value << ' ' << cell.first << ' ' << cell.second << '\n';
        out << "\n\n";
    }
}

}  // namespace mars::bench

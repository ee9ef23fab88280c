// mars: extract insights from reviews, summarise them, evaluate summaries and
// benchmark the batching gateway.
//
// Exit codes: 0 success, 1 input error, 2 backend error.

#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "mars/bench.hpp"
#include "mars/config.hpp"
#include "mars/corpus.hpp"
#include "mars/evaluation.hpp"
#include "mars/extractor.hpp"
#include "mars/mock_backend.hpp"
#include "mars/pipeline.hpp"
#include "mars/segmenter.hpp"
#include "mars/summariser.hpp"

namespace {

using namespace mars;

struct Globals {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string target_lang;
    std::string backend;
    std::string record;
    std::string replay;
    std::string data_dir;
    std::string prompts_dir;
    bool no_batching = false;
    bool verbose = false;
};

config::AppConfig resolve(const Globals& g) {
    config::AppConfig cfg;
    if (!g.config_file.empty()) config::apply_file(cfg, g.config_file);
    config::apply_env(cfg);
    if (g.seed) {
        cfg.pipeline.random_seed = *g.seed;
        cfg.sources["seed"] = "flag";
    }
    if (!g.target_lang.empty()) {
        cfg.pipeline.target_language = parse_language(g.target_lang);
        cfg.sources["target_language"] = "flag";
    }
    if (!g.backend.empty()) {
        cfg.backend.kind = config::parse_backend(g.backend);
        cfg.sources["backend"] = "flag";
    }
    if (!g.record.empty()) cfg.backend.record = g.record;
    if (!g.replay.empty()) {
        cfg.backend.replay = g.replay;
        cfg.backend.kind = config::BackendKind::replay;
        cfg.sources["backend"] = "flag";
    }
    if (!g.data_dir.empty()) {
        cfg.data_dir = g.data_dir;
        cfg.sources["data_dir"] = "flag";
    }
    if (!g.prompts_dir.empty()) cfg.prompts_dir = g.prompts_dir;
    if (g.no_batching) {
        cfg.batching.enabled = false;
        cfg.sources["batching"] = "flag";
    }
    cfg.pipeline.validate();
    if (g.verbose) std::cerr << config::describe(cfg);
    return cfg;
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    write_jsonl(out, rows);
}

int cmd_extract(const Globals& g, const std::string& corpus_path, const std::string& taxonomy_path,
                const std::string& out_dir) {
    auto cfg = resolve(g);
    const auto rep = pipeline::extract_to_store(cfg, corpus_path, taxonomy_path, out_dir);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    const auto& c = rep.clr;
    std::cout << rep.reviews << " reviews, " << rep.insights << " insights, " << rep.new_aspects
              << " new aspects, CLR " << c.clr_percent << "% (ATL/R " << c.avg_tokens_per_review << ", ATL/V "
              << c.avg_tokens_per_verbatim << ")\n";
    return 0;
}

int cmd_summarise(const Globals& g, const std::string& store, const std::string& entity,
                  const std::string& strategy, std::optional<std::size_t> top, const std::string& taxonomy_path,
                  const std::string& out_path) {
    auto cfg = resolve(g);
    if (!strategy.empty()) {
        cfg.pipeline.selection_strategy = parse_selection(strategy);
        cfg.sources["selection"] = "flag";
    }
    if (top) {
        cfg.pipeline.top_aspect_count = *top;
        cfg.sources["top_aspect_count"] = "flag";
    }
    cfg.pipeline.validate();
    const Taxonomy taxonomy = taxonomy_path.empty() ? Taxonomy{} : load_valid_taxonomy(taxonomy_path);
    std::vector<std::string> warnings;
    const auto rows = pipeline::summarise_store(cfg, store, entity, taxonomy, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    write_lines(out_path, rows);
    std::cout << rows.size() << " summaries written to " << out_path << '\n';
    return 0;
}

int cmd_evaluate(const Globals& g, const std::string& summaries_path, const std::string& references_path,
                 const std::string& likert_path, const std::string& stats_path, const std::string& out_path) {
    auto cfg = resolve(g);
    std::vector<SummaryBundle> bundles;
    std::map<std::string, std::string> references;
    if (!summaries_path.empty()) {
        std::ifstream in(summaries_path);
        if (!in) throw InputError("cannot open " + summaries_path);
        for (const auto& row : read_jsonl(in)) bundles.push_back(bundle_from_json(row));
    }
    if (!references_path.empty()) {
        std::ifstream in(references_path);
        if (!in) throw InputError("cannot open " + references_path);
        for (const auto& row : read_jsonl(in)) {
            try {
                references[row.at("entity_id").get<std::string>()] = row.at("reference").get<std::string>();
            } catch (const json::exception& e) {
                throw InputError(references_path + ": " + e.what());
            }
        }
    }
    std::vector<evaluation::LikertRecord> likert;
    if (!likert_path.empty()) {
        std::ifstream in(likert_path);
        if (!in) throw InputError("cannot open " + likert_path);
        likert = evaluation::parse_likert_csv(in);
    }
    std::vector<evaluation::MoeSummary> stats;
    if (!stats_path.empty()) {
        std::ifstream in(stats_path);
        if (!in) throw InputError("cannot open " + stats_path);
        stats = evaluation::parse_stats_csv(in);
    }
    HashEmbeddingProvider hash(cfg.backend.embedding_dimension, cfg.pipeline.random_seed);
    const auto rep = evaluation::report(bundles, references, likert, stats, hash);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << evaluation::format_table(rep);
    if (!out_path.empty()) std::ofstream(out_path) << evaluation::to_json(rep).dump(2) << '\n';
    return 0;
}

struct BenchFlags {
    std::string csv = "bench.csv";
    std::string dat = "bench.dat";
    double call_ms = 50.0;
    double prompt_ms = 0.0;
    double token_us = 0.0;
    std::size_t trials = 3;
    std::vector<std::size_t> batch_sizes = bench::kDefaultBatchSizes;
    std::vector<std::size_t> input_lengths = bench::kDefaultInputLengths;
};

int cmd_bench(const Globals& g, const BenchFlags& f) {
    auto cfg = resolve(g);
    const auto prompts = gateway::PromptSet::load(cfg.prompts_dir.value_or(cfg.data_dir / "prompts"));
    gateway::MockOptions opt;
    opt.call_latency = std::chrono::microseconds(static_cast<long>(f.call_ms * 1000.0));
    opt.prompt_latency = std::chrono::microseconds(static_cast<long>(f.prompt_ms * 1000.0));
    opt.token_latency = std::chrono::nanoseconds(static_cast<long>(f.token_us * 1000.0));
    gateway::MockBackend backend(prompts, Taxonomy{}, gateway::MockData{}, opt);

    bench::SweepOptions s;
    s.batch_sizes = f.batch_sizes;
    s.input_lengths = f.input_lengths;
    s.trials = f.trials;
    const auto results = bench::sweep(backend, prompts, s);
    {
        std::ofstream out(f.csv);
        if (!out) throw InputError("cannot write " + f.csv);
        bench::write_csv(out, results);
    }
    {
        std::ofstream out(f.dat);
        if (!out) throw InputError("cannot write " + f.dat);
        bench::write_dat(out, results);
    }
    bench::write_csv(std::cout, results);
    const bool partial = std::any_of(results.begin(), results.end(), [](const auto& r) { return r.partial; });
    return partial ? 2 : 0;
}

int cmd_segment_rules(const std::string& lang) {
    const auto& rules = segmenter::rules_for(parse_language(lang));
    auto j = segmenter::rules_to_json(rules);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_taxonomy_validate(const std::string& path) {
    const auto report = validate_taxonomy(load_taxonomy(path));
    for (const auto& e : report.errors) std::cout << "error: " << e << '\n';
    for (const auto& w : report.warnings) std::cout << "warning: " << w << '\n';
    std::cout << report.errors.size() << " errors, " << report.warnings.size() << " warnings\n";
    return report.valid() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilingual aspect-based review summarisation"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_file, "YAML config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for every stochastic path");
    app.add_option("--target-lang", g.target_lang, "Target language: EN, ES, FR, DE, IT")
        ->check(CLI::IsMember({"EN", "ES", "FR", "DE", "IT"}, CLI::ignore_case));
    app.add_option("--backend", g.backend, "mock | remote | replay");
    app.add_option("--record", g.record, "Append prompt/response pairs to this cassette");
    app.add_option("--replay", g.replay, "Answer prompts from this cassette");
    app.add_option("--data-dir", g.data_dir, "Directory with prompts/ and mock/");
    app.add_option("--prompts-dir", g.prompts_dir, "Directory with phase templates");
    app.add_flag("--no-batching", g.no_batching, "Send prompts one call at a time");
    app.add_flag("-v,--verbose", g.verbose, "Print the resolved configuration");

    std::string corpus, taxonomy, out_dir = "insights";
    auto* extract = app.add_subcommand("extract", "Reviews to insight quadruples");
    extract->add_option("--corpus", corpus, "Reviews JSONL")->required();
    extract->add_option("--taxonomy", taxonomy, "Taxonomy YAML")->required();
    extract->add_option("--out", out_dir, "Insight store directory");

    std::string store, entity, strategy, tax_opt, summaries_out = "summaries.jsonl";
    std::optional<std::size_t> top;
    auto* summarise = app.add_subcommand("summarise", "Insights to aspect and overall summaries");
    summarise->add_option("--insights", store, "Insight store directory")->required();
    summarise->add_option("--entity", entity, "Only this entity");
    summarise->add_option("--strategy", strategy, "random | weighted | centroid");
    summarise->add_option("--top-aspects", top, "Aspects in the overall summary");
    summarise->add_option("--taxonomy", tax_opt, "Taxonomy YAML (mock backend keywords)");
    summarise->add_option("--out", summaries_out, "Summaries JSONL");

    std::string eval_summaries, eval_refs, eval_likert, eval_stats, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "ROUGE, embedding score, MoE and kappa");
    evaluate->add_option("--summaries", eval_summaries, "Summaries JSONL");
    evaluate->add_option("--references", eval_refs, "JSONL of {entity_id, reference}");
    evaluate->add_option("--likert", eval_likert, "CSV item_id,criterion,rater_id,score");
    evaluate->add_option("--stats", eval_stats, "CSV criterion,mean,sd,n");
    evaluate->add_option("--out", eval_out, "Report JSON");

    BenchFlags bf;
    auto* bench_cmd = app.add_subcommand("bench", "Batched vs unbatched latency sweep on the mock backend");
    bench_cmd->add_option("--csv", bf.csv, "CSV output");
    bench_cmd->add_option("--dat", bf.dat, "Plot data output");
    bench_cmd->add_option("--call-latency-ms", bf.call_ms, "Synthetic cost per backend call");
    bench_cmd->add_option("--prompt-latency-ms", bf.prompt_ms, "Synthetic cost per prompt");
    bench_cmd->add_option("--token-latency-us", bf.token_us, "Synthetic cost per input token");
    bench_cmd->add_option("--trials", bf.trials, "Trials per point");
    bench_cmd->add_option("--batch-sizes", bf.batch_sizes, "Batch size axis")->delimiter(',');
    bench_cmd->add_option("--input-lengths", bf.input_lengths, "Input length axis")->delimiter(',');

    std::string lang;
    auto* rules = app.add_subcommand("segment-rules", "Print the segmentation rule table");
    rules->add_option("--lang", lang, "Language code")->required();

    std::string tax_file;
    auto* validate = app.add_subcommand("taxonomy-validate", "Check a taxonomy file");
    validate->add_option("file", tax_file, "Taxonomy YAML")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*extract) return cmd_extract(g, corpus, taxonomy, out_dir);
        if (*summarise) return cmd_summarise(g, store, entity, strategy, top, tax_opt, summaries_out);
        if (*evaluate) return cmd_evaluate(g, eval_summaries, eval_refs, eval_likert, eval_stats, eval_out);
        if (*bench_cmd) return cmd_bench(g, bf);
        if (*rules) return cmd_segment_rules(lang);
        if (*validate) return cmd_taxonomy_validate(tax_file);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

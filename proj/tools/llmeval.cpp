#include "llmeval/pipeline.hpp"
#include "llmeval/text_util.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <memory>
#include <sstream>

using namespace llmeval;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::string transcript;
    std::string record_to;
    std::string workdir = "work";
    std::optional<std::uint64_t> seed;
    bool force = false;
};

struct Session {
    PipelineConfig cfg;
    Workspace ws;
    std::shared_ptr<RecordingBackend> recorder;
    std::unique_ptr<Gateway> gateway;
    std::string record_to;

    Gateway& gw() {
        if (!gateway) throw ConfigError("this stage needs an LLM gateway");
        return *gateway;
    }

    ~Session() {
        if (recorder && !record_to.empty()) recorder->transcript().save(record_to);
    }
};

std::unique_ptr<Session> open_session(const Globals& g) {
    auto s = std::make_unique<Session>();
    s->cfg = g.config.empty() ? PipelineConfig{} : PipelineConfig::load(g.config);
    if (g.seed) s->cfg.seed = *g.seed;
    s->cfg.validate();
    s->ws.dir = g.workdir;
    fs::create_directories(s->ws.dir);

    std::shared_ptr<Backend> backend;
    if (!g.transcript.empty()) backend = std::make_shared<MockBackend>(Transcript::load(g.transcript));
    else backend = std::make_shared<HttpBackend>();
    if (!g.record_to.empty()) {
        s->recorder = std::make_shared<RecordingBackend>(backend);
        s->record_to = g.record_to;
        backend = s->recorder;
    }
    s->gateway = std::make_unique<Gateway>(s->cfg.gateway, backend);
    return s;
}

std::set<std::string> split_list(const std::string& s) {
    std::set<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (auto t = text::trim(item); !t.empty()) out.insert(t);
    return out;
}

void print(const StageReport& r) { std::cout << r.summary() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extract, normalize and analyze LLM evaluation results from arXiv LaTeX sources"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
    app.add_option("--gateway-transcript", g.transcript, "Replay LLM responses from this transcript")
        ->check(CLI::ExistingFile);
    app.add_option("--record-transcript", g.record_to, "Save every LLM exchange of this run here");
    app.add_option("--seed", g.seed, "Seed for resampling and sampling");
    app.add_option("--workdir,-w", g.workdir, "Directory holding stage files")->capture_default_str();
    app.add_flag("--force", g.force, "Redo work already present in the stage output");

    std::string corpus_root;
    auto* ingest = app.add_subcommand("ingest", "Scan a corpus of LaTeX sources");
    std::string from, to, categories;
    ingest->add_option("corpus,--root", corpus_root, "Corpus root directory")->required();
    ingest->add_option("--from", from, "First admitted month (YYMM)");
    ingest->add_option("--to", to, "Last admitted month (YYMM)");
    ingest->add_option("--categories", categories, "Comma-separated category codes");

    std::string paper;
    auto* tables = app.add_subcommand("tables", "Extract table environments");
    tables->add_option("--paper", paper, "Only list the candidates of this paper");
    std::string keywords;
    auto* filter = app.add_subcommand("filter", "Keep leaderboard tables");
    filter->add_option("--keywords", keywords, "Comma-separated prefilter keywords");
    auto* extract = app.add_subcommand("extract", "Extract result records");
    auto* describe = app.add_subcommand("describe", "Generate dataset descriptions");
    std::string aliases;
    auto* normalize = app.add_subcommand("normalize", "Canonicalize, rescale and deduplicate records");
    normalize->add_option("--aliases", aliases, "Dataset alias table (TSV)")->check(CLI::ExistingFile);

    std::string taxonomy = "skills";
    auto* categorize = app.add_subcommand("categorize", "Assign categories to records");
    categorize->add_option("--taxonomy", taxonomy)->check(CLI::IsMember({"skills", "reasoning"}));

    std::string kind = "cot", labels, dblp_recorded;
    bool dblp_live = false, traits = false;
    auto* analyze = app.add_subcommand("analyze", "Match pairs and test deltas");
    std::optional<std::size_t> resamples;
    analyze->add_option("--comparison,--kind", kind)->check(CLI::IsMember({"cot", "icl", "more-shots", "joint"}));
    analyze->add_option("--taxonomy", taxonomy)->check(CLI::IsMember({"skills", "reasoning"}));
    analyze->add_option("--labels", labels, "Prompt label map (TSV)")->check(CLI::ExistingFile);
    analyze->add_option("--dblp-recorded", dblp_recorded, "Recorded DBLP responses for venue filtering")
        ->check(CLI::ExistingFile);
    analyze->add_option("--resamples", resamples, "Bootstrap resamples per test");
    analyze->add_flag("--venue-filtered,--dblp", dblp_live, "Add results restricted to DBLP-listed venues");
    analyze->add_flag("--traits", traits, "Label negative cases with trait categories");

    bool log_scale = false;
    auto* trend = app.add_subcommand("trend", "Quarterly category counts");
    trend->add_option("--taxonomy", taxonomy)->check(CLI::IsMember({"skills", "reasoning"}));
    trend->add_flag("--log-scale,--log", log_scale, "Add log-scaled counts");

    auto* stats = app.add_subcommand("stats", "Record store overview");
    auto* report = app.add_subcommand("report", "Write table and figure CSVs");

    std::size_t sample_n = 40;
    auto* sample = app.add_subcommand("sample-annotations", "Draw one record per paper for annotation");
    sample->add_option("-n", sample_n)->capture_default_str();

    std::string import_path, mapping_path;
    auto* import = app.add_subcommand("import", "Load a released record export as the record store");
    import->add_option("file", import_path)->required()->check(CLI::ExistingFile);
    import->add_option("--mapping", mapping_path, "Column mapping (JSON)")->check(CLI::ExistingFile);

    auto* draft = app.add_subcommand("draft-labels", "Print a heuristic prompt label map for review");

    auto* run = app.add_subcommand("run", "Every stage in order");
    run->add_option("corpus", corpus_root)->required();
    run->add_option("--dblp-recorded", dblp_recorded)->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        auto s = open_session(g);
        auto& cfg = s->cfg;
        auto& ws = s->ws;
        if (*ingest) {
            if (!from.empty()) cfg.corpus.date_from = YearMonth::from_yymm(from);
            if (!to.empty()) cfg.corpus.date_to = YearMonth::from_yymm(to);
            if (!categories.empty()) cfg.corpus.categories = split_list(categories);
            print(run_ingest(ws, cfg, corpus_root, g.force));
        } else if (*tables) {
            if (paper.empty()) print(run_tables(ws, g.force));
            else
                for (const auto& t : read_tables(ws))
                    if (t.paper_id == paper) std::cout << t.table_index << '\t' << t.caption << '\n';
        } else if (*filter) {
            if (!keywords.empty()) cfg.keywords = split_list(keywords);
            print(run_filter(ws, cfg, s->gw(), g.force));
        }
        else if (*extract) print(run_extract(ws, cfg, s->gw(), g.force));
        else if (*describe) print(run_describe(ws, cfg, s->gw(), g.force));
        else if (*normalize) {
            if (!aliases.empty()) cfg.aliases = aliases;
            print(run_normalize(ws, cfg));
        }
        else if (*categorize) print(run_categorize(ws, cfg, s->gw(), taxonomy, g.force));
        else if (*analyze) {
            if (!labels.empty()) cfg.labels = labels;
            if (resamples) cfg.resamples = *resamples;
            AnalyzeOptions opts;
            opts.kind = *parse_analysis_kind(kind);
            opts.taxonomy = taxonomy;
            std::unique_ptr<DblpClient> dblp;
            if (!dblp_recorded.empty()) dblp = std::make_unique<RecordedDblpClient>(RecordedDblpClient::load(dblp_recorded));
            else if (dblp_live) dblp = std::make_unique<HttpDblpClient>();
            opts.dblp = dblp.get();
            if (traits) opts.traits = &s->gw();
            print(run_analyze(ws, cfg, opts));
        } else if (*trend) print(run_trend(ws, taxonomy, log_scale));
        else if (*stats) {
            print(run_stats(ws));
            std::cout << format_stats(stats_overview(read_records(ws.records())));
        } else if (*report) print(run_report(ws));
        else if (*sample) print(run_sample_annotations(ws, sample_n, cfg.seed));
        else if (*import) {
            auto mapping = mapping_path.empty() ? ImportMapping::defaults()
                                                : ImportMapping::from_json(json::parse(text::read_file(mapping_path)));
            ImportReport rep;
            auto records = import_released(import_path, mapping, &rep);
            write_records(ws.records(), records);
            std::cout << "import: " << rep.rows << " rows, " << rep.imported << " imported, " << rep.rejected.size()
                      << " rejected\n";
            if (!rep.unmapped_columns.empty())
                std::cout << "  kept in extras: " << text::join(rep.unmapped_columns, ", ") << '\n';
        } else if (*draft) {
            std::cout << PromptLabelMap::draft(read_records(ws.records()));
        } else if (*run) {
            std::unique_ptr<DblpClient> dblp;
            if (!dblp_recorded.empty()) dblp = std::make_unique<RecordedDblpClient>(RecordedDblpClient::load(dblp_recorded));
            for (const auto& r : run_all(ws, cfg, corpus_root, s->gw(), dblp.get())) print(r);
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const AuthError& e) {
        std::cerr << "authentication error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

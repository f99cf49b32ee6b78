#include "llmeval/pipeline.hpp"

#include "llmeval/categorize.hpp"
#include "llmeval/describe.hpp"
#include "llmeval/errors.hpp"
#include "llmeval/extract.hpp"
#include "llmeval/text_util.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

namespace llmeval {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// configuration

namespace {

YearMonth parse_year_month(const std::string& s) {
    int y = 0, m = 0;
    char dash = 0;
    std::istringstream in(s);
    if (!(in >> y >> dash >> m) || dash != '-' || m < 1 || m > 12)
        throw ConfigError("expected YYYY-MM, got '" + s + "'");
    return {y, m};
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    try {
        if (j.contains("gateway")) c.gateway = GatewayConfig::from_json(j["gateway"]);
        if (j.contains("corpus")) {
            const auto& k = j["corpus"];
            if (k.contains("from")) c.corpus.date_from = parse_year_month(k["from"].get<std::string>());
            if (k.contains("to")) c.corpus.date_to = parse_year_month(k["to"].get<std::string>());
            if (k.contains("categories")) c.corpus.categories = k["categories"].get<std::set<std::string>>();
        }
        if (j.contains("keywords")) c.keywords = j["keywords"].get<std::set<std::string>>();
        if (j.contains("targets")) {
            c.targets.clear();
            for (const auto& t : j["targets"]) {
                auto m = parse_target_model(t.get<std::string>());
                if (!m) throw ConfigError("unknown target model '" + t.get<std::string>() + "'");
                c.targets.push_back(*m);
            }
        }
        if (j.contains("context")) {
            c.context.token_budget = j["context"].value("token_budget", c.context.token_budget);
            c.context.tokens_per_word = j["context"].value("tokens_per_word", c.context.tokens_per_word);
        }
        c.augment = j.value("augment", c.augment);
        c.workers = j.value("workers", c.workers);
        if (j.contains("prompt_dir")) c.prompt_dir = j["prompt_dir"].get<std::string>();
        if (j.contains("aliases")) c.aliases = j["aliases"].get<std::string>();
        if (j.contains("labels")) c.labels = j["labels"].get<std::string>();
        c.resamples = j.value("resamples", c.resamples);
        c.alpha = j.value("alpha", c.alpha);
        c.tests = j.value("tests", c.tests);
        c.dblp_threshold = j.value("dblp_threshold", c.dblp_threshold);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad configuration: ") + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(text::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    auto c = from_json(j);
    auto base = path.parent_path();
    for (auto* p : {&c.prompt_dir, &c.aliases, &c.labels})
        if (!p->empty() && p->is_relative() && j.contains(p == &c.prompt_dir ? "prompt_dir" : p == &c.aliases ? "aliases" : "labels"))
            *p = base / *p;
    return c;
}

void PipelineConfig::validate() const {
    corpus.validate();
    if (keywords.empty()) throw ConfigError("keyword set must be non-empty");
    if (targets.empty()) throw ConfigError("at least one target model is required");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (resamples == 0) throw ConfigError("resamples must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (tests < 1) throw ConfigError("tests must be at least 1");
    if (!(dblp_threshold > 0.0 && dblp_threshold <= 1.0)) throw ConfigError("dblp_threshold must lie in (0,1]");
    if (context.token_budget <= 0.0) throw ConfigError("context token budget must be positive");
}

std::string StageReport::summary() const {
    std::ostringstream out;
    out << stage << ": processed " << processed << ", reused " << reused << ", wrote " << output_rows;
    for (const auto& w : warnings) out << "\n  warning: " << w;
    return out.str();
}

// ---------------------------------------------------------------------------
// serialization

json to_json(const PaperSource& p) {
    return {{"arxiv_id", p.arxiv_id},       {"categories", p.categories},
            {"published", p.published.to_string()}, {"title", p.title},
            {"bibliography", p.bibliography}, {"latex", p.latex}};
}

PaperSource paper_from_json(const json& j) {
    try {
        PaperSource p;
        p.arxiv_id = j.at("arxiv_id").get<std::string>();
        p.categories = j.at("categories").get<std::set<std::string>>();
        p.published = parse_year_month(j.at("published").get<std::string>());
        p.title = j.value("title", "");
        p.bibliography = j.value("bibliography", std::map<std::string, std::string>{});
        p.latex = j.at("latex").get<std::string>();
        return p;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad paper row: ") + e.what());
    } catch (const ConfigError& e) {
        throw SchemaError(std::string("bad paper row: ") + e.what());
    }
}

json to_json(const TableCandidate& t) {
    return {{"paper_id", t.paper_id}, {"table_index", t.table_index}, {"caption", t.caption}, {"latex", t.latex}};
}

TableCandidate table_from_json(const json& j) {
    try {
        return {j.at("paper_id").get<std::string>(), j.at("table_index").get<int>(), j.at("latex").get<std::string>(),
                j.value("caption", "")};
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad table row: ") + e.what());
    }
}

json to_json(const DeltaObservation& o) {
    auto shots = [](const std::optional<int>& s) { return s ? json(*s) : json(nullptr); };
    return {{"comparison", comparison_name(o.comparison)},
            {"shot_tag", o.shot_tag},
            {"paper_id", o.paper_id},
            {"table_index", o.table_index},
            {"model", canonical_name(o.canonical_model)},
            {"dataset", o.canonical_dataset},
            {"subset", o.subset},
            {"metric", metric_name(o.canonical_metric)},
            {"shots_a", shots(o.shots_a)},
            {"shots_b", shots(o.shots_b)},
            {"value_a", o.value_a},
            {"value_b", o.value_b},
            {"delta", o.delta},
            {"categories", o.categories},
            {"record_a", o.record_a},
            {"record_b", o.record_b},
            {"group_pairs", o.group_pairs}};
}

DeltaObservation observation_from_json(const json& j) {
    try {
        DeltaObservation o;
        auto c = parse_comparison(j.at("comparison").get<std::string>());
        auto m = parse_target_model(j.at("model").get<std::string>());
        auto metric = parse_metric_name(j.at("metric").get<std::string>());
        if (!c || !m || !metric) throw SchemaError("unknown comparison, model or metric in observation");
        o.comparison = *c;
        o.canonical_model = *m;
        o.canonical_metric = *metric;
        o.shot_tag = j.value("shot_tag", "");
        o.paper_id = j.at("paper_id").get<std::string>();
        o.table_index = j.at("table_index").get<int>();
        o.canonical_dataset = j.at("dataset").get<std::string>();
        o.subset = j.at("subset").get<std::string>();
        if (!j.at("shots_a").is_null()) o.shots_a = j["shots_a"].get<int>();
        if (!j.at("shots_b").is_null()) o.shots_b = j["shots_b"].get<int>();
        o.value_a = j.at("value_a").get<double>();
        o.value_b = j.at("value_b").get<double>();
        o.delta = j.at("delta").get<double>();
        o.categories = j.value("categories", std::vector<std::string>{});
        o.record_a = j.at("record_a").get<std::string>();
        o.record_b = j.at("record_b").get<std::string>();
        o.group_pairs = j.value("group_pairs", std::size_t{1});
        return o;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad observation: ") + e.what());
    }
}

json to_json(const StatTestResult& r) {
    return {{"category", r.category},         {"n", r.n},
            {"mean_delta", r.mean_delta},     {"mean_of_paper_means", r.mean_of_paper_means},
            {"p_value", r.p_value},           {"threshold", r.threshold},
            {"significant", r.significant}};
}

StatTestResult stat_result_from_json(const json& j) {
    try {
        StatTestResult r;
        r.category = j.at("category").get<std::string>();
        r.n = j.at("n").get<std::size_t>();
        r.mean_delta = j.at("mean_delta").get<double>();
        r.mean_of_paper_means = j.value("mean_of_paper_means", 0.0);
        r.p_value = j.at("p_value").get<double>();
        r.threshold = j.at("threshold").get<double>();
        r.significant = j.at("significant").get<bool>();
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad test result: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// stage inputs

namespace {

constexpr std::string_view kPapersKind = "papers";
constexpr std::string_view kTablesKind = "tables";
constexpr std::string_view kVerdictsKind = "table_verdicts";
constexpr std::string_view kExtractedKind = "extraction_units";
constexpr std::string_view kDescriptionsKind = "descriptions";
constexpr std::string_view kConflictsKind = "dedup_conflicts";
constexpr std::string_view kAssignmentsKind = "category_assignments";
constexpr std::string_view kObservationsKind = "observations";
constexpr std::string_view kTestsKind = "significance_tests";

void require(const fs::path& p, std::string_view stage) {
    if (!fs::exists(p))
        throw IoError(std::string(stage) + " needs " + p.string() + "; run the previous stage first");
}

std::string unit_key(const std::string& paper, int table) { return paper + '\x1f' + std::to_string(table); }

Taxonomy taxonomy_named(std::string_view name) {
    if (name == "skills") return Taxonomy::skills();
    if (name == "reasoning") return Taxonomy::reasoning_types();
    throw ConfigError("unknown taxonomy '" + std::string(name) + "' (expected skills or reasoning)");
}

void raise_auth(const BatchResult& batch) {
    for (const auto& e : batch.errors)
        if (e.kind == "auth") throw AuthError(e.message);
}

/// Runs `fn(i)` for i in [0, n) on `workers` threads.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::max(1u, workers); ++w)
        pool.emplace_back([&] {
            for (auto i = next++; i < n; i = next++) fn(i);
        });
}

AliasTable aliases_for(const PipelineConfig& cfg) {
    return cfg.aliases.empty() ? AliasTable::builtin() : AliasTable::load(cfg.aliases);
}

struct ExtractedUnit {
    std::string paper_id;
    int table_index = 0;
    bool complete = false;
    std::vector<ExtractionRecord> records;
    json notes = json::object();
};

std::vector<ExtractedUnit> read_extracted(const Workspace& ws) {
    std::vector<ExtractedUnit> out;
    if (!fs::exists(ws.extracted())) return out;
    for (const auto& row : read_store(ws.extracted(), kExtractedKind)) {
        ExtractedUnit u;
        u.paper_id = row.at("paper_id").get<std::string>();
        u.table_index = row.at("table_index").get<int>();
        u.complete = row.at("status").get<std::string>() == "complete";
        for (const auto& r : row.at("records")) u.records.push_back(extraction_from_json(r));
        u.notes = row.value("notes", json::object());
        out.push_back(std::move(u));
    }
    return out;
}

json unit_row(const ExtractedUnit& u) {
    json records = json::array();
    for (const auto& r : u.records) records.push_back(to_json(r));
    return {{"paper_id", u.paper_id},
            {"table_index", u.table_index},
            {"status", u.complete ? "complete" : "incomplete"},
            {"records", records},
            {"notes", u.notes}};
}

std::vector<ExtractionRecord> extracted_records(const Workspace& ws) {
    std::vector<ExtractionRecord> out;
    for (auto& u : read_extracted(ws))
        if (u.complete)
            for (auto& r : u.records) out.push_back(std::move(r));
    return out;
}

}  // namespace

std::vector<PaperSource> read_papers(const Workspace& ws) {
    std::vector<PaperSource> out;
    for (const auto& row : read_store(ws.papers(), kPapersKind)) out.push_back(paper_from_json(row));
    return out;
}

std::vector<TableCandidate> read_tables(const Workspace& ws) {
    std::vector<TableCandidate> out;
    for (const auto& row : read_store(ws.tables(), kTablesKind)) out.push_back(table_from_json(row));
    return out;
}

DescriptionIndex read_descriptions(const Workspace& ws) {
    DescriptionIndex idx;
    if (!fs::exists(ws.descriptions())) return idx;
    for (const auto& row : read_store(ws.descriptions(), kDescriptionsKind)) {
        if (row.value("status", "") != "complete") continue;
        auto key = description_key(row.at("paper_id").get<std::string>(), row.at("dataset").get<std::string>(),
                                   row.at("subset").get<std::string>());
        const auto& d = row.at("description");
        idx[key] = d.is_null() ? std::nullopt : std::optional<DatasetDescription>(description_from_json(d));
    }
    return idx;
}

std::vector<CategoryAssignment> read_categories(const Workspace& ws, std::string_view taxonomy) {
    std::vector<CategoryAssignment> out;
    auto path = ws.categories(taxonomy);
    if (!fs::exists(path)) return out;
    for (const auto& row : read_store(path, kAssignmentsKind)) out.push_back(assignment_from_json(row));
    return out;
}

// ---------------------------------------------------------------------------
// stages

StageReport run_ingest(const Workspace& ws, const PipelineConfig& cfg, const fs::path& corpus_root, bool force) {
    StageReport rep;
    rep.stage = "ingest";
    if (!force && fs::exists(ws.papers())) {
        rep.reused = read_store(ws.papers(), kPapersKind).size();
        rep.output_rows = rep.reused;
        return rep;
    }
    cfg.corpus.validate();
    if (!fs::is_directory(corpus_root)) throw IoError("corpus root " + corpus_root.string() + " is not a directory");
    auto scan = scan_corpus(corpus_root, cfg.corpus, std::nullopt, cfg.workers);
    std::vector<json> rows;
    for (const auto& p : scan.sources) rows.push_back(to_json(p));
    write_store(ws.papers(), kPapersKind, rows);
    std::string skipped;
    for (const auto& s : scan.skips) skipped += s.entry + '\t' + s.reason + '\n';
    text::write_file(ws.skipped(), skipped);
    rep.processed = scan.sources.size() + scan.skips.size();
    rep.output_rows = rows.size();
    if (!scan.skips.empty()) rep.warnings.push_back(std::to_string(scan.skips.size()) + " entries skipped");
    return rep;
}

StageReport run_tables(const Workspace& ws, bool force) {
    StageReport rep;
    rep.stage = "tables";
    require(ws.papers(), "tables");
    auto papers = read_papers(ws);
    std::map<std::string, std::vector<json>> done;
    if (!force && fs::exists(ws.tables()))
        for (auto& row : read_store(ws.tables(), kTablesKind)) done[row.at("paper_id").get<std::string>()].push_back(row);

    std::vector<json> rows;
    for (const auto& p : papers) {
        if (auto it = done.find(p.arxiv_id); it != done.end()) {
            rep.reused++;
            for (auto& r : it->second) rows.push_back(std::move(r));
            continue;
        }
        rep.processed++;
        try {
            for (const auto& t : extract_tables(p)) rows.push_back(to_json(t));
        } catch (const Error& e) {
            rep.warnings.push_back(p.arxiv_id + ": " + e.what());
        }
    }
    write_store(ws.tables(), kTablesKind, rows);
    rep.output_rows = rows.size();
    return rep;
}

StageReport run_filter(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway, bool force) {
    StageReport rep;
    rep.stage = "filter";
    require(ws.tables(), "filter");
    auto tables = read_tables(ws);
    std::map<std::string, FilterVerdict> done;
    if (!force && fs::exists(ws.verdicts()))
        for (const auto& row : read_store(ws.verdicts(), kVerdictsKind)) {
            auto v = FilterVerdict::from_json(row);
            if (!text::starts_with_ci(v.reason, "gateway-error")) done[unit_key(v.paper_id, v.table_index)] = v;
        }

    std::vector<TableCandidate> todo;
    for (const auto& t : tables)
        if (!done.count(unit_key(t.paper_id, t.table_index))) todo.push_back(t);
    rep.reused = tables.size() - todo.size();
    rep.processed = todo.size();

    auto tmpl = load_prompt("leaderboard", cfg.prompt_dir);
    for (auto& v : filter_tables(todo, cfg.keywords, gateway, tmpl)) {
        if (text::starts_with_ci(v.reason, "gateway-error")) rep.warnings.push_back(v.paper_id + " table " + std::to_string(v.table_index) + ": " + v.reason);
        if (v.reason == "gateway-error: auth") throw AuthError("leaderboard classification was refused credentials");
        done[unit_key(v.paper_id, v.table_index)] = v;
    }
    std::vector<json> rows;
    for (const auto& t : tables) rows.push_back(done.at(unit_key(t.paper_id, t.table_index)).to_json());
    write_store(ws.verdicts(), kVerdictsKind, rows);
    rep.output_rows = rows.size();
    return rep;
}

StageReport run_extract(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway, bool force) {
    StageReport rep;
    rep.stage = "extract";
    require(ws.verdicts(), "extract");
    auto tables = read_tables(ws);
    std::set<std::string> kept;
    for (const auto& row : read_store(ws.verdicts(), kVerdictsKind)) {
        auto v = FilterVerdict::from_json(row);
        if (v.kept()) kept.insert(unit_key(v.paper_id, v.table_index));
    }

    std::map<std::string, ExtractedUnit> units;
    if (!force)
        for (auto& u : read_extracted(ws))
            if (u.complete) units[unit_key(u.paper_id, u.table_index)] = std::move(u);

    std::vector<const TableCandidate*> todo;
    for (const auto& t : tables) {
        auto k = unit_key(t.paper_id, t.table_index);
        if (!kept.count(k)) continue;
        if (units.count(k)) rep.reused++;
        else todo.push_back(&t);
    }
    rep.processed = todo.size();

    auto extraction = load_prompt("extraction", cfg.prompt_dir);
    auto augmentation = load_prompt("augmentation", cfg.prompt_dir);

    // one extraction call per table and target
    std::vector<std::string> prompts;
    for (const auto* t : todo)
        for (auto target : cfg.targets) prompts.push_back(render_extraction_prompt(extraction, *t, target));
    BatchResult batch = prompts.empty() ? BatchResult{} : gateway.complete_batch(prompts);
    raise_auth(batch);

    struct Job {
        const TableCandidate* table;
        TargetModel target;
        std::vector<ExtractionRecord> records;
    };
    std::vector<Job> jobs;
    std::map<std::string, ExtractedUnit> fresh;
    for (std::size_t i = 0; i < todo.size(); ++i) {
        auto& u = fresh[unit_key(todo[i]->paper_id, todo[i]->table_index)];
        u.paper_id = todo[i]->paper_id;
        u.table_index = todo[i]->table_index;
        u.complete = true;
        for (std::size_t k = 0; k < cfg.targets.size(); ++k) {
            auto idx = i * cfg.targets.size() + k;
            auto target = cfg.targets[k];
            auto name = std::string(canonical_name(target));
            if (!batch.responses[idx]) {
                u.complete = false;
                u.notes[name] = "gateway-error";
                continue;
            }
            auto outcome = interpret_extraction_reply(*batch.responses[idx], *todo[i], target);
            if (outcome.no_target_model) u.notes[name] = "no-target-model";
            else if (!outcome.errors.empty()) u.notes[name] = std::to_string(outcome.errors.size()) + " unparsed lines";
            if (!outcome.records.empty()) jobs.push_back({todo[i], target, std::move(outcome.records)});
        }
    }

    // one augmentation call per table and target that produced records
    if (cfg.augment && !jobs.empty()) {
        std::map<std::string, PaperSource> papers;
        for (auto& p : read_papers(ws)) papers.emplace(p.arxiv_id, std::move(p));
        std::map<std::string, ContextText> contexts;
        std::vector<std::string> aug_prompts;
        for (const auto& j : jobs) {
            auto& ctx = contexts[j.table->paper_id];
            if (ctx.paper_id.empty()) ctx = build_context(papers.at(j.table->paper_id), cfg.context);
            aug_prompts.push_back(render_augmentation_prompt(augmentation, j.records, *j.table, ctx));
        }
        auto aug = gateway.complete_batch(aug_prompts);
        raise_auth(aug);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            auto& u = fresh[unit_key(jobs[i].table->paper_id, jobs[i].table->table_index)];
            if (!aug.responses[i]) {
                u.complete = false;
                u.notes[std::string(canonical_name(jobs[i].target))] = "augmentation gateway-error";
                continue;
            }
            auto outcome = apply_augmentation_reply(jobs[i].records, *aug.responses[i]);
            jobs[i].records = std::move(outcome.records);
        }
    }
    for (auto& j : jobs) {
        auto& u = fresh[unit_key(j.table->paper_id, j.table->table_index)];
        for (auto& r : j.records) u.records.push_back(std::move(r));
    }
    for (auto& [k, u] : fresh) {
        if (!u.complete) rep.warnings.push_back(u.paper_id + " table " + std::to_string(u.table_index) + " incomplete");
        units[k] = std::move(u);
    }

    std::vector<json> rows;
    std::size_t records = 0;
    for (const auto& t : tables) {
        auto it = units.find(unit_key(t.paper_id, t.table_index));
        if (it == units.end()) continue;
        records += it->second.records.size();
        rows.push_back(unit_row(it->second));
    }
    write_store(ws.extracted(), kExtractedKind, rows);
    rep.output_rows = records;
    return rep;
}

StageReport run_describe(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway, bool force) {
    StageReport rep;
    rep.stage = "describe";
    require(ws.extracted(), "describe");
    auto records = extracted_records(ws);

    struct Key {
        std::string paper, dataset, subset, citation;
    };
    std::map<std::string, Key> keys;
    for (const auto& r : records) {
        if (is_missing(r.fields.dataset)) continue;
        auto k = description_key(r.paper_id, r.fields.dataset, r.fields.subset);
        auto [it, fresh] = keys.emplace(k, Key{r.paper_id, r.fields.dataset, r.fields.subset, std::string(kMissing)});
        if (is_missing(it->second.citation) && !is_missing(r.fields.dataset_citation_tag))
            it->second.citation = r.fields.dataset_citation_tag;
    }

    std::map<std::string, json> done;
    if (!force && fs::exists(ws.descriptions()))
        for (auto& row : read_store(ws.descriptions(), kDescriptionsKind))
            if (row.value("status", "") == "complete")
                done[description_key(row.at("paper_id").get<std::string>(), row.at("dataset").get<std::string>(),
                                      row.at("subset").get<std::string>())] = row;

    std::vector<std::pair<std::string, Key>> todo;
    for (const auto& [k, key] : keys)
        if (!done.count(k)) todo.emplace_back(k, key);
    rep.reused = keys.size() - todo.size();
    rep.processed = todo.size();

    std::map<std::string, PaperSource> papers;
    if (!todo.empty())
        for (auto& p : read_papers(ws)) papers.emplace(p.arxiv_id, std::move(p));
    PaperLookup resolver = [&papers](const std::string& id) -> std::optional<PaperSource> {
        auto it = papers.find(id);
        if (it == papers.end()) return std::nullopt;
        return it->second;
    };
    auto templates = DescriptionTemplates::load(cfg.prompt_dir);

    std::vector<json> results(todo.size());
    std::atomic<bool> auth_failed{false};
    parallel_for(todo.size(), static_cast<unsigned>(std::max(1, cfg.gateway.max_in_flight)), [&](std::size_t i) {
        const auto& key = todo[i].second;
        json row = {{"paper_id", key.paper}, {"dataset", key.dataset}, {"subset", key.subset}};
        try {
            TemplateFields f;
            f.dataset = key.dataset;
            f.subset = key.subset;
            f.dataset_citation_tag = key.citation;
            auto it = papers.find(key.paper);
            if (it == papers.end()) throw PreconditionError("paper " + key.paper + " is not in the corpus");
            auto res = describe(f, it->second, resolver, gateway, templates, cfg.context);
            json stages = json::array();
            for (auto s : res.stages) stages.push_back(source_name(s));
            row["description"] = res.description ? to_json(*res.description) : json(nullptr);
            row["stages"] = stages;
            row["note"] = res.note;
            row["status"] = "complete";
        } catch (const AuthError& e) {
            auth_failed = true;
            row["status"] = "error";
            row["note"] = e.what();
        } catch (const Error& e) {
            row["status"] = "error";
            row["note"] = e.what();
        }
        results[i] = std::move(row);
    });
    if (auth_failed) throw AuthError("description generation was refused credentials");

    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (results[i]["status"] != "complete")
            rep.warnings.push_back(todo[i].second.dataset + " (" + todo[i].second.paper + "): " +
                                   results[i]["note"].get<std::string>());
        done[todo[i].first] = std::move(results[i]);
    }
    std::vector<json> rows;
    for (const auto& [k, key] : keys) {
        if (auto it = done.find(k); it != done.end()) rows.push_back(it->second);
    }
    write_store(ws.descriptions(), kDescriptionsKind, rows);
    rep.output_rows = rows.size();
    return rep;
}

StageReport run_normalize(const Workspace& ws, const PipelineConfig& cfg) {
    StageReport rep;
    rep.stage = "normalize";
    require(ws.extracted(), "normalize");
    auto records = extracted_records(ws);
    auto aliases = aliases_for(cfg);
    auto descriptions = read_descriptions(ws);
    NormalizeOptions opts;
    opts.aliases = &aliases;
    if (fs::exists(ws.descriptions())) opts.descriptions = &descriptions;
    else rep.warnings.push_back("no descriptions found; records kept without them");

    auto result = normalize_records(records, opts);
    write_records(ws.records(), result.records);
    std::string dropped;
    for (const auto& d : result.dropped) dropped += d.record_id + '\t' + d.reason + '\n';
    text::write_file(ws.dropped(), dropped);
    std::vector<json> conflicts;
    for (const auto& c : result.conflicts) {
        json members = json::array();
        for (const auto& m : c.members) members.push_back(to_json(m));
        conflicts.push_back({{"key", c.key}, {"members", members}});
    }
    write_store(ws.conflicts(), kConflictsKind, conflicts);
    rep.processed = records.size();
    rep.output_rows = result.records.size();
    if (!result.conflicts.empty())
        rep.warnings.push_back(std::to_string(result.conflicts.size()) + " conflicting duplicate groups removed");
    return rep;
}

StageReport run_categorize(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway,
                           std::string_view taxonomy, bool force) {
    StageReport rep;
    rep.stage = "categorize:" + std::string(taxonomy);
    require(ws.records(), "categorize");
    auto tax = taxonomy_named(taxonomy);
    auto records = read_records(ws.records());
    std::map<std::string, CategoryAssignment> done;
    if (!force)
        for (auto& a : read_categories(ws, taxonomy))
            if (a.note.rfind("gateway-error", 0) != 0) done[a.record_id] = std::move(a);

    std::vector<NormalizedRecord> todo;
    for (const auto& r : records)
        if (!done.count(r.record_id)) todo.push_back(r);
    rep.reused = records.size() - todo.size();
    rep.processed = todo.size();

    auto tmpl = load_prompt("categorize", cfg.prompt_dir);
    for (auto& a : categorize_records(todo, tax, gateway, tmpl)) {
        if (a.note == "gateway-error: auth") throw AuthError("categorization was refused credentials");
        done[a.record_id] = std::move(a);
    }
    std::vector<json> rows;
    std::size_t flagged = 0;
    for (const auto& r : records) {
        const auto& a = done.at(r.record_id);
        flagged += a.flagged;
        rows.push_back(to_json(a));
    }
    write_store(ws.categories(taxonomy), kAssignmentsKind, rows);
    rep.output_rows = rows.size();
    if (flagged) rep.warnings.push_back(std::to_string(flagged) + " assignments fell back to the default label");
    return rep;
}

std::optional<AnalysisKind> parse_analysis_kind(std::string_view s) {
    if (s == "cot") return AnalysisKind::Cot;
    if (s == "icl") return AnalysisKind::Icl;
    if (s == "more-shots") return AnalysisKind::MoreShots;
    if (s == "joint") return AnalysisKind::Joint;
    return std::nullopt;
}

std::string_view analysis_kind_name(AnalysisKind k) {
    switch (k) {
        case AnalysisKind::Cot: return "cot";
        case AnalysisKind::Icl: return "icl";
        case AnalysisKind::MoreShots: return "more-shots";
        case AnalysisKind::Joint: return "joint";
    }
    return "cot";
}

StageReport run_analyze(const Workspace& ws, const PipelineConfig& cfg, const AnalyzeOptions& options) {
    StageReport rep;
    rep.stage = "analyze:" + std::string(analysis_kind_name(options.kind)) + ":" + options.taxonomy;
    require(ws.records(), "analyze");
    taxonomy_named(options.taxonomy);
    auto records = read_records(ws.records());
    auto assignments = read_categories(ws, options.taxonomy);
    if (assignments.empty()) rep.warnings.push_back("no " + options.taxonomy + " categories; observations untagged");
    auto categories = index_categories(assignments);

    bool needs_labels = options.kind == AnalysisKind::Cot || options.kind == AnalysisKind::Joint;
    PromptLabelMap labels;
    if (needs_labels) {
        if (cfg.labels.empty()) throw ConfigError("this comparison needs a prompt label map (--labels)");
        labels = PromptLabelMap::load(cfg.labels);
    }

    std::vector<DeltaObservation> obs;
    switch (options.kind) {
        case AnalysisKind::Cot: obs = match_cot_pairs(records, labels, &categories); break;
        case AnalysisKind::Icl: obs = match_shot_pairs(records, ShotMode::FewVsZero, &categories); break;
        case AnalysisKind::MoreShots: obs = match_shot_pairs(records, ShotMode::MoreVsFewer, &categories); break;
        case AnalysisKind::Joint: obs = match_joint(records, labels, &categories); break;
    }

    auto dir = ws.analysis() / (std::string(analysis_kind_name(options.kind)) + "_" + options.taxonomy);
    fs::create_directories(dir);
    if (needs_labels) {
        auto unmapped = labels.unmapped(records);
        text::write_file(dir / "unmapped_prompts.txt", text::join(unmapped, "\n") + (unmapped.empty() ? "" : "\n"));
        if (!unmapped.empty())
            rep.warnings.push_back(std::to_string(unmapped.size()) + " prompting strings unmapped (treated as other)");
    }

    std::vector<json> obs_rows;
    for (const auto& o : obs) obs_rows.push_back(to_json(o));
    write_store(dir / "observations.jsonl", kObservationsKind, obs_rows);
    text::write_file(dir / "observations.csv", observations_csv(obs));
    text::write_file(dir / "paper_means.csv", paper_means_csv(per_paper_means(obs)));

    // summaries per comparison (and shot setting for the matched-shot comparison)
    std::map<std::string, std::vector<DeltaObservation>> by_comparison;
    for (const auto& o : obs) {
        auto name = std::string(comparison_name(o.comparison));
        if (!o.shot_tag.empty()) name += ":" + o.shot_tag;
        by_comparison[name].push_back(o);
    }
    std::string summaries = "comparison,grouping,group,n,mean,median,q1,q3\n";
    for (const auto& [name, list] : by_comparison)
        for (auto [g, gname] : {std::pair{Grouping::Overall, "overall"}, std::pair{Grouping::PerCategory, "per_category"},
                                std::pair{Grouping::PerPaperThenCategory, "per_paper_then_category"}}) {
            auto csv = summaries_csv(name, summarize(list, g));
            for (const auto& line : text::split_lines(csv.substr(csv.find('\n') + 1))) {
                if (line.empty()) continue;
                auto comma = line.find(',');
                summaries += line.substr(0, comma) + "," + gname + line.substr(comma) + "\n";
            }
        }
    text::write_file(dir / "summaries.csv", summaries);

    std::vector<StatTestResult> total, filtered;
    if (options.kind != AnalysisKind::Joint) {
        total = significance_by_category(obs, cfg.resamples, cfg.seed, cfg.alpha, cfg.tests, cfg.workers);
        if (options.dblp) {
            std::map<std::string, std::string> titles;
            if (fs::exists(ws.papers()))
                for (const auto& p : read_papers(ws)) titles[p.arxiv_id] = p.title;
            std::vector<std::string> ids, names;
            for (const auto& [id, t] : titles) {
                ids.push_back(id);
                names.push_back(t);
            }
            auto venues = venue_filter(ids, names, *options.dblp, cfg.dblp_threshold);
            text::write_file(dir / "venues.csv", venue_report_csv(venues));
            filtered = significance_by_category(restrict_to_papers(obs, venues.peer_reviewed), cfg.resamples,
                                                cfg.seed, cfg.alpha, cfg.tests, cfg.workers);
        }
        std::vector<json> rows;
        for (const auto& r : total) rows.push_back(json{{"set", "total"}, {"result", to_json(r)}});
        for (const auto& r : filtered) rows.push_back(json{{"set", "filtered"}, {"result", to_json(r)}});
        write_store(dir / "significance.jsonl", kTestsKind, rows);
        text::write_file(dir / "significance.csv", significance_table_csv(total, filtered));
    }

    auto negatives = export_negative_cases(obs, records);
    std::vector<json> neg_rows;
    for (const auto& [family, list] : negatives)
        for (const auto& c : list) neg_rows.push_back(to_json(c));
    write_jsonl(dir / "negatives.jsonl", neg_rows);
    if (options.traits && !neg_rows.empty()) {
        auto report = label_negative_traits(negatives, Taxonomy::negative_traits(), *options.traits,
                                            load_prompt("negative_traits", cfg.prompt_dir));
        text::write_file(dir / "traits.csv", trait_ratios_csv(report));
    }
    rep.processed = records.size();
    rep.output_rows = obs.size();
    return rep;
}

StageReport run_trend(const Workspace& ws, std::string_view taxonomy, bool log_scale) {
    StageReport rep;
    rep.stage = "trend:" + std::string(taxonomy);
    require(ws.records(), "trend");
    auto records = read_records(ws.records());
    auto assignments = read_categories(ws, taxonomy);
    if (assignments.empty()) throw IoError("trend needs " + ws.categories(taxonomy).string());
    auto cells = quarterly_trend(records, assignments);
    fs::create_directories(ws.reports());
    text::write_file(ws.reports() / ("trend_" + std::string(taxonomy) + ".csv"), trend_csv(cells, log_scale));
    rep.processed = records.size();
    rep.output_rows = cells.size();
    return rep;
}

StageReport run_stats(const Workspace& ws) {
    StageReport rep;
    rep.stage = "stats";
    require(ws.records(), "stats");
    auto records = read_records(ws.records());
    auto s = stats_overview(records);
    fs::create_directories(ws.reports());
    text::write_file(ws.reports() / "stats.csv", stats_csv(s));
    text::write_file(ws.reports() / "stats.json", to_json(s).dump(2) + "\n");
    rep.processed = records.size();
    rep.output_rows = 1;
    return rep;
}

StageReport run_report(const Workspace& ws) {
    StageReport rep;
    rep.stage = "report";
    fs::create_directories(ws.reports());
    std::vector<fs::path> dirs;
    if (fs::exists(ws.analysis()))
        for (const auto& e : fs::directory_iterator(ws.analysis()))
            if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());

    std::string table4 = "Comparison,Median,Q1,Q3,Mean,N\n";
    std::string table5 = "Setting,Median Δ,Q1,Q3,Mean,N\n";
    auto stat_row = [](const std::string& label, const std::vector<double>& deltas) {
        if (deltas.empty()) return text::csv_escape(label) + ",,,,,0\n";
        auto s = summary_stats(deltas);
        std::ostringstream out;
        out.setf(std::ios::fixed);
        out.precision(2);
        out << text::csv_escape(label) << ',' << s.median << ',' << s.q1 << ',' << s.q3 << ',' << s.mean << ','
            << s.n << '\n';
        return out.str();
    };

    bool table6_written = false;
    for (const auto& d : dirs) {
        auto name = d.filename().string();
        for (const char* f : {"observations.csv", "paper_means.csv", "summaries.csv"})
            if (fs::exists(d / f)) {
                text::write_file(ws.reports() / ("figure_" + name + "_" + f), text::read_file(d / f));
                rep.output_rows++;
            }
        if (fs::exists(d / "significance.jsonl")) {
            std::vector<StatTestResult> total, filtered;
            for (const auto& row : read_store(d / "significance.jsonl", kTestsKind))
                (row.at("set") == "total" ? total : filtered).push_back(stat_result_from_json(row.at("result")));
            text::write_file(ws.reports() / ("table_significance_" + name + ".csv"),
                             significance_table_csv(total, filtered));
            table6_written = true;
            rep.output_rows++;
        }
        if (name.rfind("joint_", 0) == 0 && fs::exists(d / "observations.jsonl")) {
            std::vector<double> fewcot, zero, few;
            for (const auto& row : read_store(d / "observations.jsonl", kObservationsKind)) {
                auto o = observation_from_json(row);
                if (o.comparison == Comparison::FewcotVsZerocot) fewcot.push_back(o.delta);
                else if (o.shot_tag == "zero-shot") zero.push_back(o.delta);
                else if (o.shot_tag == "few-shot") few.push_back(o.delta);
            }
            table4 += stat_row("few-shot CoT - zero-shot CoT (" + name + ")", fewcot);
            table5 += stat_row("zero-shot (" + name + ")", zero);
            table5 += stat_row("few-shot (" + name + ")", few);
        }
        rep.processed++;
    }
    if (!table6_written) text::write_file(ws.reports() / "table_significance.csv", significance_table_csv({}, {}));
    text::write_file(ws.reports() / "table_demonstrations_in_cot.csv", table4);
    text::write_file(ws.reports() / "table_cot_vs_direct_matched_shots.csv", table5);
    rep.output_rows += 2;
    return rep;
}

StageReport run_sample_annotations(const Workspace& ws, std::size_t n, std::uint64_t seed) {
    StageReport rep;
    rep.stage = "sample-annotations";
    require(ws.records(), "sample-annotations");
    auto records = read_records(ws.records());
    auto sample = export_annotation_sample(records, n, seed);
    std::vector<json> rows;
    for (const auto& r : sample) rows.push_back(annotation_row(r));
    fs::create_directories(ws.reports());
    write_jsonl(ws.reports() / "annotation_sample.jsonl", rows);
    rep.processed = records.size();
    rep.output_rows = rows.size();
    return rep;
}

std::vector<StageReport> run_all(const Workspace& ws, const PipelineConfig& cfg, const fs::path& corpus_root,
                                 Gateway& gateway, DblpClient* dblp) {
    cfg.validate();
    fs::create_directories(ws.dir);
    std::vector<StageReport> out;
    out.push_back(run_ingest(ws, cfg, corpus_root));
    out.push_back(run_tables(ws));
    out.push_back(run_filter(ws, cfg, gateway));
    out.push_back(run_extract(ws, cfg, gateway));
    out.push_back(run_describe(ws, cfg, gateway));
    out.push_back(run_normalize(ws, cfg));
    out.push_back(run_categorize(ws, cfg, gateway, "skills"));
    out.push_back(run_categorize(ws, cfg, gateway, "reasoning"));
    bool labels = !cfg.labels.empty();
    for (auto kind : {AnalysisKind::Cot, AnalysisKind::Icl, AnalysisKind::MoreShots, AnalysisKind::Joint}) {
        if (!labels && (kind == AnalysisKind::Cot || kind == AnalysisKind::Joint)) continue;
        for (const char* tax : {"skills", "reasoning"}) {
            AnalyzeOptions opts;
            opts.kind = kind;
            opts.taxonomy = tax;
            if (std::string_view(tax) == "reasoning" && kind == AnalysisKind::Cot) opts.dblp = dblp;
            if (std::string_view(tax) == "skills" && kind != AnalysisKind::Joint) opts.traits = &gateway;
            out.push_back(run_analyze(ws, cfg, opts));
        }
    }
    out.push_back(run_trend(ws, "skills", true));
    out.push_back(run_stats(ws));
    out.push_back(run_report(ws));
    return out;
}

}  // namespace llmeval

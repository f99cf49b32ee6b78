#include "llmeval/store.hpp"

#include "llmeval/errors.hpp"
#include "llmeval/extract.hpp"
#include "llmeval/text_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace llmeval {

std::vector<json> read_store(const std::filesystem::path& path, std::string_view kind) {
    auto rows = read_jsonl(path);
    if (rows.empty()) return rows;
    const auto& head = rows.front();
    if (!head.is_object() || !head.contains("llmeval_store"))
        throw SchemaError(path.string() + ": missing store header");
    if (!head["llmeval_store"].is_number_integer() || head["llmeval_store"].get<int>() != kStoreVersion)
        throw SchemaError(path.string() + ": unsupported store version " + head["llmeval_store"].dump());
    if (head.value("kind", "") != kind)
        throw SchemaError(path.string() + ": holds '" + head.value("kind", "") + "', expected '" +
                          std::string(kind) + "'");
    rows.erase(rows.begin());
    return rows;
}

void write_store(const std::filesystem::path& path, std::string_view kind, const std::vector<json>& rows) {
    std::vector<json> all;
    all.reserve(rows.size() + 1);
    all.push_back({{"llmeval_store", kStoreVersion}, {"kind", kind}});
    all.insert(all.end(), rows.begin(), rows.end());
    write_jsonl(path, all);
}

void write_records(const std::filesystem::path& path, const std::vector<NormalizedRecord>& records) {
    std::set<std::string> ids;
    std::vector<json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        if (!ids.insert(r.record_id).second) throw SchemaError("duplicate record id " + r.record_id);
        rows.push_back(to_json(r));
    }
    write_store(path, kRecordsKind, rows);
}

std::vector<NormalizedRecord> read_records(const std::filesystem::path& path) {
    std::vector<NormalizedRecord> out;
    for (const auto& row : read_store(path, kRecordsKind)) out.push_back(normalized_from_json(row));
    return out;
}

// ---------------------------------------------------------------------------

StatsOverview stats_overview(const std::vector<NormalizedRecord>& records) {
    StatsOverview s;
    std::set<std::string> datasets, papers, tables;
    for (auto m : kAllTargets) s.per_model[std::string(canonical_name(m))] = 0;
    for (const auto& r : records) {
        ++s.total_records;
        datasets.insert(r.canonical_dataset);
        papers.insert(r.source.paper_id);
        tables.insert(r.source.paper_id + '\x1f' + std::to_string(r.source.table_index));
        s.per_model[std::string(canonical_name(r.canonical_model))]++;
        if (is_missing(r.fields().subset)) ++s.missing_subset;
        if (is_missing(r.fields().prompting_method)) ++s.missing_prompting;
        if (is_missing(r.fields().number_of_shots)) ++s.missing_shots;
        if (r.description) s.description_sources[std::string(source_name(r.description->source))]++;
    }
    s.unique_datasets = datasets.size();
    s.source_papers = papers.size();
    s.unique_tables = tables.size();
    return s;
}

json to_json(const StatsOverview& s) {
    return {{"total_records", s.total_records},
            {"unique_datasets", s.unique_datasets},
            {"source_papers", s.source_papers},
            {"unique_tables", s.unique_tables},
            {"per_model", s.per_model},
            {"missing", {{"subset", s.missing_subset},
                         {"prompting_method", s.missing_prompting},
                         {"number_of_shots", s.missing_shots}}},
            {"description_sources", s.description_sources}};
}

namespace {

std::vector<std::pair<std::string, std::size_t>> stats_rows(const StatsOverview& s) {
    std::vector<std::pair<std::string, std::size_t>> rows = {
        {"Total records", s.total_records},
        {"Unique datasets", s.unique_datasets},
        {"Source papers", s.source_papers},
        {"Unique tables", s.unique_tables},
    };
    for (auto m : kAllTargets) {
        auto name = std::string(canonical_name(m));
        auto it = s.per_model.find(name);
        rows.emplace_back("Records: " + name, it == s.per_model.end() ? 0 : it->second);
    }
    rows.emplace_back("Missing: subset", s.missing_subset);
    rows.emplace_back("Missing: prompting method", s.missing_prompting);
    rows.emplace_back("Missing: number of shots", s.missing_shots);
    for (const auto& [src, n] : s.description_sources) rows.emplace_back("Descriptions: " + src, n);
    return rows;
}

}  // namespace

std::string format_stats(const StatsOverview& s) {
    auto rows = stats_rows(s);
    std::size_t width = 0;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    std::ostringstream out;
    for (const auto& [k, v] : rows) out << k << std::string(width - k.size() + 2, ' ') << v << '\n';
    return out.str();
}

std::string stats_csv(const StatsOverview& s) {
    std::string out = "statistic,count\n";
    for (const auto& [k, v] : stats_rows(s)) out += text::csv_escape(k) + "," + std::to_string(v) + "\n";
    return out;
}

// ---------------------------------------------------------------------------

std::vector<NormalizedRecord> export_annotation_sample(const std::vector<NormalizedRecord>& records, std::size_t n,
                                                       std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_paper;
    for (std::size_t i = 0; i < records.size(); ++i) by_paper[records[i].source.paper_id].push_back(i);
    if (by_paper.size() < n)
        throw InsufficientPapers("asked for " + std::to_string(n) + " records from distinct papers but only " +
                                 std::to_string(by_paper.size()) + " papers are present");
    std::vector<std::string> papers;
    for (const auto& [p, idx] : by_paper) papers.push_back(p);
    std::mt19937_64 rng(seed);
    std::vector<NormalizedRecord> out;
    // partial Fisher-Yates over the sorted paper list
    for (std::size_t k = 0; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, papers.size() - 1);
        std::swap(papers[k], papers[pick(rng)]);
        const auto& idx = by_paper[papers[k]];
        std::uniform_int_distribution<std::size_t> which(0, idx.size() - 1);
        out.push_back(records[idx[which(rng)]]);
    }
    return out;
}

json annotation_row(const NormalizedRecord& r) {
    json attrs = json::object();
    for (auto k : kTemplateKeys)
        if (k != "dataset_citation_tag") attrs[std::string(k)] = field_ref(r.fields(), k);
    return {{"record_id", r.record_id},
            {"paper_id", r.source.paper_id},
            {"table_index", r.source.table_index},
            {"attributes", attrs},
            {"original_extracted_dictionary",
             r.source.original_extracted ? to_json(*r.source.original_extracted) : to_json(r.fields())},
            {"description", r.description ? to_json(*r.description) : json(nullptr)}};
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) { return text::format_number(v, 4); }
std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(kMissing); }

}  // namespace

std::string observations_csv(const std::vector<DeltaObservation>& observations) {
    std::string out =
        "comparison,shot_tag,paper_id,table_index,model,dataset,subset,metric,shots_a,shots_b,value_a,value_b,delta,"
        "categories,record_a,record_b,group_pairs\n";
    for (const auto& o : observations) {
        std::vector<std::string> cols = {std::string(comparison_name(o.comparison)),
                                         o.shot_tag,
                                         o.paper_id,
                                         std::to_string(o.table_index),
                                         std::string(canonical_name(o.canonical_model)),
                                         o.canonical_dataset,
                                         o.subset,
                                         std::string(metric_name(o.canonical_metric)),
                                         opt_int(o.shots_a),
                                         opt_int(o.shots_b),
                                         num(o.value_a),
                                         num(o.value_b),
                                         num(o.delta),
                                         text::join(o.categories, ";"),
                                         o.record_a,
                                         o.record_b,
                                         std::to_string(o.group_pairs)};
        for (auto& c : cols) c = text::csv_escape(c);
        out += text::join(cols, ",") + "\n";
    }
    return out;
}

std::string paper_means_csv(const std::vector<PaperMean>& means) {
    std::string out = "category,paper_id,mean_delta,n\n";
    for (const auto& m : means)
        out += text::csv_escape(m.category) + "," + text::csv_escape(m.paper_id) + "," + num(m.mean) + "," +
               std::to_string(m.n) + "\n";
    return out;
}

std::string summaries_csv(const std::string& comparison, const SummaryReport& report) {
    std::string out = "comparison,group,n,mean,median,q1,q3\n";
    for (const auto& g : report.groups)
        out += text::csv_escape(comparison) + "," + text::csv_escape(g.group) + "," + std::to_string(g.stats.n) +
               "," + num(g.stats.mean) + "," + num(g.stats.median) + "," + num(g.stats.q1) + "," +
               num(g.stats.q3) + "\n";
    return out;
}

std::string significance_table_csv(const std::vector<StatTestResult>& total,
                                   const std::vector<StatTestResult>& filtered) {
    std::string out =
        "Category,Total Mean Δ,Total p-value,Total Significant,Filtered Mean Δ,Filtered p-value,Filtered Significant\n";
    std::map<std::string, std::pair<const StatTestResult*, const StatTestResult*>> rows;
    std::vector<std::string> order;
    for (const auto& r : total) {
        if (!rows.count(r.category)) order.push_back(r.category);
        rows[r.category].first = &r;
    }
    for (const auto& r : filtered) {
        if (!rows.count(r.category)) order.push_back(r.category);
        rows[r.category].second = &r;
    }
    auto cells = [](const StatTestResult* r) -> std::string {
        if (!r) return ",,";
        std::ostringstream p;
        p.setf(std::ios::fixed);
        p.precision(4);
        p << r->p_value;
        std::ostringstream m;
        m.setf(std::ios::fixed);
        m.precision(2);
        m << r->mean_delta;
        return m.str() + "," + p.str() + "," + (r->significant ? "Yes" : "No");
    };
    for (const auto& c : order)
        out += text::csv_escape(c) + "," + cells(rows[c].first) + "," + cells(rows[c].second) + "\n";
    return out;
}

std::string trend_csv(const std::vector<TrendCell>& cells, bool log_scale) {
    std::string out = log_scale ? "category,quarter,count,log10_count\n" : "category,quarter,count\n";
    for (const auto& c : cells) {
        out += text::csv_escape(c.label) + "," + c.quarter + "," + std::to_string(c.count);
        if (log_scale) out += "," + num(std::log10(static_cast<double>(c.count)));
        out += "\n";
    }
    return out;
}

std::string trait_ratios_csv(const TraitReport& r) {
    std::string out = "comparison,trait,count,ratio\n";
    for (const auto& [family, counts] : r.counts)
        for (const auto& [label, n] : counts)
            out += family + "," + text::csv_escape(label) + "," + std::to_string(n) + "," +
                   num(r.ratios.at(family).at(label)) + "\n";
    return out;
}

std::string venue_report_csv(const VenueReport& r) {
    std::string out = "paper_id,status,venue,similarity,title,note\n";
    for (const auto& d : r.decisions)
        out += text::csv_escape(d.paper_id) + "," + std::string(venue_status_name(d.status)) + "," +
               text::csv_escape(d.venue) + "," + num(d.similarity) + "," + text::csv_escape(d.title) + "," +
               text::csv_escape(d.note) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// import

ImportMapping ImportMapping::defaults() {
    ImportMapping m;
    m.columns = {
        {"paper_id", {"paper_id", "table_source_arxiv_id", "arxiv_id", "source_arxiv_id"}},
        {"table_index", {"table_index", "table_id", "table_idx"}},
        {"value", {"value", "metric_value", "performance", "score"}},
        {"dataset", {"dataset", "dataset_name"}},
        {"dataset_citation_tag", {"dataset_citation_tag", "dataset_citation"}},
        {"subset", {"subset", "dataset_subset"}},
        {"model_name", {"model_name", "model"}},
        {"metric", {"metric", "metric_name"}},
        {"prompting_method", {"prompting_method", "prompting"}},
        {"number_of_shots", {"number_of_shots", "num_shots", "shots"}},
        {"original_extracted", {"original_extracted_dictionary", "initial_extracted_dict", "original_extracted"}},
        {"description", {"dataset_description", "description"}},
        {"record_id", {"record_id", "id"}},
    };
    return m;
}

ImportMapping ImportMapping::from_json(const json& j) {
    auto m = defaults();
    for (const auto& [field, v] : j.items()) {
        if (!m.columns.count(field)) throw ConfigError("import mapping names unknown field '" + field + "'");
        if (v.is_string()) m.columns[field] = {v.get<std::string>()};
        else m.columns[field] = v.get<std::vector<std::string>>();
    }
    return m;
}

namespace {

std::vector<json> read_rows(const std::filesystem::path& path) {
    auto content = text::read_file(path);
    auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '[') {
        try {
            return json::parse(content).get<std::vector<json>>();
        } catch (const json::exception& e) {
            throw SchemaError(path.string() + ": " + e.what());
        }
    }
    return read_jsonl(path);
}

std::string as_field(const json& v) {
    if (v.is_null()) return std::string(kMissing);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return text::format_number(v.get<double>(), 6);
    return v.dump();
}

}  // namespace

std::vector<NormalizedRecord> import_released(const std::filesystem::path& path, const ImportMapping& mapping,
                                              ImportReport* report) {
    ImportReport local;
    ImportReport& rep = report ? *report : local;
    rep = {};
    std::vector<NormalizedRecord> out;
    std::set<std::string> unmapped;
    std::set<std::string> ids;

    auto rows = read_rows(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        ++rep.rows;
        if (!row.is_object()) {
            rep.rejected.emplace_back(i + 1, "row is not an object");
            continue;
        }
        std::set<std::string> used;
        std::string last_col;
        auto get = [&](const std::string& field) -> const json* {
            for (const auto& col : mapping.columns.at(field)) {
                auto it = row.find(col);
                if (it != row.end()) {
                    used.insert(col);
                    last_col = col;
                    return &*it;
                }
            }
            return nullptr;
        };

        NormalizedRecord r;
        const json* pid = get("paper_id");
        if (!pid || pid->is_null()) {
            rep.rejected.emplace_back(i + 1, "no paper id");
            continue;
        }
        r.source.paper_id = as_field(*pid);
        if (const json* t = get("table_index"); t && t->is_number_integer()) r.source.table_index = t->get<int>();
        else if (t && t->is_string() && !t->get<std::string>().empty() &&
                 std::all_of(t->get<std::string>().begin(), t->get<std::string>().end(), ::isdigit))
            r.source.table_index = std::stoi(t->get<std::string>());
        for (auto k : kTemplateKeys)
            if (const json* v = get(std::string(k))) field_ref(r.source.fields, k) = as_field(*v);

        const auto& f = r.source.fields;
        std::optional<TargetModel> model;
        if (!is_missing(f.model_name)) {
            model = parse_target_model(f.model_name);
            if (!model) model = canonicalize_model(f.model_name);
        }
        if (!model) {
            rep.rejected.emplace_back(i + 1, "model '" + f.model_name + "' is not a target model");
            continue;
        }
        r.canonical_model = *model;
        r.source.target = *model;
        auto metric = is_missing(f.metric) ? std::nullopt : canonical_metric(f.metric);
        if (!metric) {
            rep.rejected.emplace_back(i + 1, "metric '" + f.metric + "' is not approved");
            continue;
        }
        r.canonical_metric = *metric;
        const json* v = get("value");
        if (v && v->is_number()) {
            r.scaled_value = v->get<double>();
        } else {
            auto parsed = strip_value_markup(f.value);
            if (!parsed) {
                rep.rejected.emplace_back(i + 1, "value '" + f.value + "' is not numeric");
                continue;
            }
            r.scaled_value = parsed->value;
        }
        r.canonical_dataset = is_missing(f.dataset) ? std::string(kMissing) : dataset_key(f.dataset);

        if (const json* o = get("original_extracted"); o && o->is_object())
            r.source.original_extracted = fields_from_json(*o);
        else if (o && o->is_string()) {
            try {
                r.source.original_extracted = fields_from_json(json::parse(o->get<std::string>()));
            } catch (const json::exception&) {
            }
        }
        if (const json* d = get("description")) {
            if (d->is_object() && d->contains("source")) {
                try {
                    r.description = description_from_json(*d);
                } catch (const SchemaError&) {
                }
            }
            // free-text descriptions carry no source; keep them verbatim
            if (!r.description) used.erase(last_col);
        }

        std::string id = std::to_string(i + 1);
        if (const json* rid = get("record_id"); rid && !rid->is_null()) id = as_field(*rid);
        r.record_id = "released/" + id;
        if (!ids.insert(r.record_id).second) r.record_id += "#" + std::to_string(i + 1);

        for (const auto& [col, val] : row.items()) {
            if (used.count(col)) continue;
            r.extras[col] = val;
            unmapped.insert(col);
        }
        out.push_back(std::move(r));
        ++rep.imported;
    }
    rep.unmapped_columns.assign(unmapped.begin(), unmapped.end());
    return out;
}

}  // namespace llmeval

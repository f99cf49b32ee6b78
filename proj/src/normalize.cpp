#include "llmeval/normalize.hpp"

#include "llmeval/errors.hpp"
#include "llmeval/extract.hpp"
#include "llmeval/text_util.hpp"

#include <cmath>
#include <regex>
#include <unordered_map>

namespace llmeval {

std::optional<int> NormalizedRecord::shots() const {
    auto s = text::trim(source.fields.number_of_shots);
    if (s.empty() || s.size() > 6) return std::nullopt;
    for (char c : s)
        if (c < '0' || c > '9') return std::nullopt;
    return std::stoi(s);
}

// ---------------------------------------------------------------------------
// metrics

namespace {

std::string metric_key(std::string_view name) {
    std::string s = text::to_lower(text::trim(name));
    text::replace_all(s, "(%)", "");
    std::string out;
    for (char c : s)
        if (c != ' ' && c != '-' && c != '_' && c != '.' && c != '%' && c != '\'' && c != '\\' && c != '\t')
            out += c;
    return out;
}

const std::unordered_map<std::string, Metric>& metric_synonyms() {
    static const std::unordered_map<std::string, Metric> table = {
        {"accuracy", Metric::Accuracy},
        {"acc", Metric::Accuracy},
        {"top1accuracy", Metric::Accuracy},
        {"top1acc", Metric::Accuracy},
        {"exactmatch", Metric::ExactMatch},
        {"em", Metric::ExactMatch},
        {"exactmatchem", Metric::ExactMatch},
        {"f1", Metric::F1},
        {"f1score", Metric::F1},
        {"f", Metric::F1},
        {"macrof1", Metric::F1},
        {"microf1", Metric::F1},
        {"f1macro", Metric::F1},
        {"f1micro", Metric::F1},
        {"bleu", Metric::Bleu},
        {"bleu4", Metric::Bleu},
        {"sacrebleu", Metric::Bleu},
        {"rouge", Metric::Rouge},
        {"rougel", Metric::Rouge},
        {"rouge1", Metric::Rouge},
        {"rouge2", Metric::Rouge},
        {"rougelsum", Metric::Rouge},
        {"mrr", Metric::Mrr},
        {"meanreciprocalrank", Metric::Mrr},
        {"precision", Metric::Precision},
        {"prec", Metric::Precision},
        {"recall", Metric::Recall},
        {"rec", Metric::Recall},
        {"pearsoncorrelationcoefficient", Metric::PearsonCorrelation},
        {"pearsoncorrelation", Metric::PearsonCorrelation},
        {"pearson", Metric::PearsonCorrelation},
        {"pearsonr", Metric::PearsonCorrelation},
        {"pearsonsr", Metric::PearsonCorrelation},
        {"mae", Metric::Mae},
        {"meanabsoluteerror", Metric::Mae},
        {"mse", Metric::Mse},
        {"meansquarederror", Metric::Mse},
        {"meansquareerror", Metric::Mse},
    };
    return table;
}

}  // namespace

std::optional<Metric> canonical_metric(std::string_view name) {
    if (auto exact = parse_metric_name(name)) return exact;
    auto it = metric_synonyms().find(metric_key(name));
    if (it == metric_synonyms().end()) return std::nullopt;
    return it->second;
}

MetricValue normalize_metric(std::string_view name, double value, UnitHint at_one) {
    if (!std::isfinite(value)) throw PreconditionError("metric value is not finite");
    MetricValue out;
    auto m = canonical_metric(name);
    if (!m) return out;
    out.metric = *m;
    out.value = value;
    out.status = MetricStatus::Ok;
    if (!is_bounded(*m)) return out;
    if (value >= 0.0 && value < 1.0) out.value = value * 100.0;
    else if (value == 1.0 && at_one == UnitHint::Fraction) out.value = 100.0;
    if (out.value < 0.0 || out.value > 100.0) out.status = MetricStatus::OutOfRange;
    return out;
}

// ---------------------------------------------------------------------------
// models

std::optional<TargetModel> canonicalize_model(std::string_view raw_name, std::optional<TargetModel> hint) {
    if (is_missing(raw_name)) throw PreconditionError("model name is missing");
    std::string s = text::to_lower(text::trim(raw_name));
    std::string compact;
    for (char c : s)
        if (c != ' ') compact += c == '_' ? '-' : c;
    auto has = [&](std::string_view needle) {
        return s.find(needle) != std::string::npos || compact.find(needle) != std::string::npos;
    };

    std::optional<TargetModel> family;
    if (has("gpt-4o") || has("gpt4o") || has("gpt-4-o") || has("gpt4-o")) {
        family = TargetModel::Gpt4o;
    } else if (has("gpt-4") || has("gpt4")) {
        family = TargetModel::Gpt4;
    } else if (has("claude")) {
        if (has("opus")) family = TargetModel::Claude3Opus;
        else if (hint == TargetModel::Claude3Opus &&
                 (compact == "claude3" || compact == "claude-3" || compact == "claude"))
            family = TargetModel::Claude3Opus;
    } else if (has("gemini")) {
        if (has("pro")) family = TargetModel::Gemini10Pro;
        else if (hint == TargetModel::Gemini10Pro &&
                 (compact == "gemini" || compact == "gemini1.0" || compact == "gemini-1.0" || compact == "gemini1"))
            family = TargetModel::Gemini10Pro;
    }
    if (!family) return std::nullopt;

    auto spec = TargetSpec::for_model(*family);
    if (has("+")) return std::nullopt;
    for (const auto& inc : spec.version_inclusions)
        if (has(inc)) return family;
    for (const auto& ex : spec.variant_exclusions)
        if (has(ex)) return std::nullopt;
    return family;
}

bool is_fine_tuned(const TemplateFields& fields) {
    static const std::regex marker(R"((fine[- ]?tun|finetun|\bft\b|\bsft\b|\blora\b))", std::regex::icase);
    return std::regex_search(fields.model_name, marker) || std::regex_search(fields.prompting_method, marker);
}

// ---------------------------------------------------------------------------
// datasets

std::string dataset_key(std::string_view name) {
    std::string out;
    for (char c : text::to_lower(text::trim(name)))
        if (!std::isspace(static_cast<unsigned char>(c)) && c != '-' && c != '_') out += c;
    return out;
}

bool differs_only_by_variant(std::string_view a, std::string_view b) {
    if (a == b) return false;
    std::size_t p = 0;
    while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
    // a shared digit run is part of the version, not the base name
    while (p > 0 && (std::isdigit(static_cast<unsigned char>(a[p - 1])) || a[p - 1] == '.')) --p;
    if (p < 2) return false;
    static const std::regex marker(
        R"(^(v?\d+(\.\d+)*[kb]?|mini|small|base|large|xl|xxl|lite|tiny|hard|easy|plus|pro|full|dev|test)$)");
    auto is_marker = [&](std::string_view rest) {
        return rest.empty() || std::regex_match(std::string(rest), marker);
    };
    return is_marker(a.substr(p)) && is_marker(b.substr(p));
}

AliasTable AliasTable::parse(std::string_view text) {
    AliasTable t;
    std::size_t n = 0;
    for (const auto& raw : text::split_lines(text)) {
        ++n;
        auto line = text::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto cols = text::split(line, '\t');
        if (cols.size() != 2 || text::trim(cols[0]).empty() || text::trim(cols[1]).empty())
            throw ConfigError("alias table line " + std::to_string(n) + ": expected alias<TAB>canonical");
        t.add(text::trim(cols[0]), text::trim(cols[1]));
    }
    return t;
}

AliasTable AliasTable::load(const std::filesystem::path& path) { return parse(text::read_file(path)); }

AliasTable AliasTable::builtin() {
    static const AliasTable table = load(std::filesystem::path(LLMEVAL_DATA_DIR) / "aliases.tsv");
    return table;
}

std::string AliasTable::find(const std::string& key) const {
    std::string cur = key;
    for (auto it = parent_.find(cur); it != parent_.end() && it->second != cur; it = parent_.find(cur))
        cur = it->second;
    return cur;
}

void AliasTable::add(std::string_view alias, std::string_view canonical) {
    auto a = dataset_key(alias);
    auto c = dataset_key(canonical);
    if (a.empty() || c.empty()) throw ConfigError("alias entry has an empty name");
    if (differs_only_by_variant(a, c))
        throw ConfigError("alias '" + std::string(alias) + "' differs from '" + std::string(canonical) +
                          "' only by a version or size marker");
    ++entries_;
    auto ra = find(a);
    auto rc = find(c);
    parent_.emplace(rc, rc);
    if (ra == rc) return;
    // the canonical side keeps its root so the representative is stable
    parent_[ra] = rc;
    for (auto& [k, v] : parent_) v = find(k);
}

std::string AliasTable::canonicalize(std::string_view name) const { return find(dataset_key(name)); }

std::string canonicalize_dataset(std::string_view name, const AliasTable& aliases) {
    if (is_missing(name)) throw PreconditionError("dataset name is missing");
    return aliases.canonicalize(name);
}

// ---------------------------------------------------------------------------
// dedup

std::string dedup_key(const NormalizedRecord& r) {
    const auto& f = r.fields();
    std::string k;
    for (const auto& part :
         {r.canonical_dataset, text::to_lower(text::trim(f.subset)), text::trim(f.number_of_shots),
          text::to_lower(text::trim(f.prompting_method)), std::string(metric_name(r.canonical_metric)),
          std::string(canonical_name(r.canonical_model)), r.source.paper_id}) {
        k += part;
        k += '\x1f';
    }
    return k;
}

DedupResult dedup(const std::vector<NormalizedRecord>& records) {
    DedupResult out;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) groups[dedup_key(records[i])].push_back(i);

    std::vector<bool> keep(records.size(), false);
    for (const auto& [key, idx] : groups) {
        bool agree = true;
        for (auto i : idx)
            if (records[i].scaled_value != records[idx.front()].scaled_value) agree = false;
        if (agree) {
            keep[idx.front()] = true;
            out.collapsed += idx.size() - 1;
            continue;
        }
        DedupConflict c;
        c.key = key;
        for (char& ch : c.key)
            if (ch == '\x1f') ch = '|';
        c.key.pop_back();
        for (auto i : idx) c.members.push_back(records[i]);
        out.conflicts.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < records.size(); ++i)
        if (keep[i]) out.records.push_back(records[i]);
    return out;
}

// ---------------------------------------------------------------------------
// pipeline

std::string description_key(std::string_view paper_id, std::string_view dataset, std::string_view subset) {
    return std::string(paper_id) + '\x1f' + std::string(dataset) + '\x1f' + std::string(subset);
}

std::string make_record_id(const ExtractionRecord& r, std::size_t ordinal) {
    std::string target(canonical_name(r.target));
    return r.paper_id + "/t" + std::to_string(r.table_index) + "/" + target + "/r" + std::to_string(ordinal);
}

namespace {

const AliasTable& aliases_or_empty(const NormalizeOptions& o) {
    static const AliasTable empty;
    return o.aliases ? *o.aliases : empty;
}

/// Applies the description join and dedup shared by both entry points.
NormalizeResult finish(std::vector<NormalizedRecord> candidates, std::vector<DroppedRecord> dropped,
                       const NormalizeOptions& options) {
    NormalizeResult out;
    out.dropped = std::move(dropped);
    std::vector<NormalizedRecord> described;
    for (auto& r : candidates) {
        if (options.descriptions) {
            auto it = options.descriptions->find(
                description_key(r.source.paper_id, r.fields().dataset, r.fields().subset));
            if (it == options.descriptions->end()) {
                if (!r.description) {
                    out.dropped.push_back({r.record_id, "missing-description"});
                    continue;
                }
            } else if (!it->second) {
                out.dropped.push_back({r.record_id, "invalid-description"});
                continue;
            } else {
                r.description = it->second;
            }
        }
        described.push_back(std::move(r));
    }
    auto d = dedup(described);
    out.records = std::move(d.records);
    out.conflicts = std::move(d.conflicts);
    for (const auto& c : out.conflicts)
        for (const auto& m : c.members) out.dropped.push_back({m.record_id, "conflicting-duplicate"});
    return out;
}

}  // namespace

NormalizeResult normalize_records(const std::vector<ExtractionRecord>& records, const NormalizeOptions& options) {
    const auto& aliases = aliases_or_empty(options);
    std::vector<DroppedRecord> dropped;

    struct Pending {
        NormalizedRecord rec;
        double raw = 0.0;
    };
    std::vector<Pending> pending;
    std::map<std::string, std::size_t> ordinals;

    for (const auto& r : records) {
        auto unit = r.paper_id + '\x1f' + std::to_string(r.table_index) + '\x1f' + std::string(canonical_name(r.target));
        auto id = make_record_id(r, ordinals[unit]++);
        const auto& f = r.fields;
        auto drop = [&](std::string reason) { dropped.push_back({id, std::move(reason)}); };

        if (is_fine_tuned(f)) { drop("fine-tuned"); continue; }
        auto parsed = strip_value_markup(f.value);
        if (!parsed || !std::isfinite(parsed->value)) { drop("non-numeric-value"); continue; }
        if (is_missing(f.metric)) { drop("missing-metric"); continue; }
        auto metric = canonical_metric(f.metric);
        if (!metric) { drop("metric-not-approved"); continue; }
        if (is_missing(f.dataset) || dataset_key(f.dataset).empty()) { drop("missing-dataset"); continue; }

        TargetModel model = r.target;
        if (!is_missing(f.model_name)) {
            auto m = canonicalize_model(f.model_name, r.target);
            if (!m) { drop("not-target-model"); continue; }
            if (*m != r.target) { drop("model-mismatch"); continue; }
            model = *m;
        }

        Pending p;
        p.rec.record_id = id;
        p.rec.source = r;
        p.rec.canonical_model = model;
        p.rec.canonical_dataset = canonicalize_dataset(f.dataset, aliases);
        p.rec.canonical_metric = *metric;
        p.raw = parsed->value;
        if (parsed->multi_number) p.rec.source.flags.push_back("multi-number-cell");
        pending.push_back(std::move(p));
    }

    // a bounded value of exactly 1 follows the scale of its table siblings
    std::map<std::string, std::pair<int, int>> votes;  // fraction-like, percent-like
    auto vote_key = [](const Pending& p) {
        return p.rec.source.paper_id + '\x1f' + std::to_string(p.rec.source.table_index) + '\x1f' +
               std::string(metric_name(p.rec.canonical_metric));
    };
    for (const auto& p : pending) {
        if (!is_bounded(p.rec.canonical_metric) || p.raw == 1.0) continue;
        auto& v = votes[vote_key(p)];
        (p.raw >= 0.0 && p.raw < 1.0 ? v.first : v.second)++;
    }

    std::vector<NormalizedRecord> candidates;
    for (auto& p : pending) {
        auto hint = UnitHint::Percent;
        if (is_bounded(p.rec.canonical_metric) && p.raw == 1.0) {
            auto v = votes[vote_key(p)];
            hint = v.first > v.second ? UnitHint::Fraction : UnitHint::Percent;
            p.rec.source.flags.push_back(hint == UnitHint::Fraction ? "value-one:fraction" : "value-one:percent");
        }
        auto mv = normalize_metric(metric_name(p.rec.canonical_metric), p.raw, hint);
        if (mv.status != MetricStatus::Ok) {
            dropped.push_back({p.rec.record_id, "out-of-range"});
            continue;
        }
        p.rec.scaled_value = mv.value;
        candidates.push_back(std::move(p.rec));
    }
    return finish(std::move(candidates), std::move(dropped), options);
}

NormalizeResult normalize_records(const std::vector<NormalizedRecord>& records, const NormalizeOptions& options) {
    const auto& aliases = aliases_or_empty(options);
    std::vector<DroppedRecord> dropped;
    std::vector<NormalizedRecord> candidates;
    for (const auto& r : records) {
        if (is_fine_tuned(r.fields())) { dropped.push_back({r.record_id, "fine-tuned"}); continue; }
        if (!std::isfinite(r.scaled_value) ||
            (is_bounded(r.canonical_metric) && (r.scaled_value < 0.0 || r.scaled_value > 100.0))) {
            dropped.push_back({r.record_id, "out-of-range"});
            continue;
        }
        auto copy = r;
        copy.canonical_dataset = canonicalize_dataset(r.canonical_dataset, aliases);
        candidates.push_back(std::move(copy));
    }
    return finish(std::move(candidates), std::move(dropped), options);
}

// ---------------------------------------------------------------------------
// serialization

json to_json(const TemplateFields& f) {
    json j = json::object();
    for (auto k : kTemplateKeys) j[std::string(k)] = field_ref(f, k);
    return j;
}

TemplateFields fields_from_json(const json& j) {
    TemplateFields f;
    for (auto k : kTemplateKeys) {
        auto it = j.find(std::string(k));
        if (it == j.end()) continue;
        if (it->is_string()) field_ref(f, k) = it->get<std::string>();
        else if (it->is_number()) field_ref(f, k) = it->dump();
        else if (!it->is_null()) throw SchemaError("field '" + std::string(k) + "' must be a string");
    }
    return f;
}

json to_json(const ExtractionRecord& r) {
    json j = {{"paper_id", r.paper_id},
              {"table_index", r.table_index},
              {"target", canonical_name(r.target)},
              {"fields", to_json(r.fields)},
              {"original_extracted", r.original_extracted ? to_json(*r.original_extracted) : json(nullptr)},
              {"flags", r.flags}};
    return j;
}

ExtractionRecord extraction_from_json(const json& j) {
    try {
        ExtractionRecord r;
        r.paper_id = j.at("paper_id").get<std::string>();
        r.table_index = j.at("table_index").get<int>();
        auto t = parse_target_model(j.at("target").get<std::string>());
        if (!t) throw SchemaError("unknown target model '" + j.at("target").get<std::string>() + "'");
        r.target = *t;
        r.fields = fields_from_json(j.at("fields"));
        if (j.contains("original_extracted") && !j["original_extracted"].is_null())
            r.original_extracted = fields_from_json(j["original_extracted"]);
        r.flags = j.value("flags", std::vector<std::string>{});
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad extraction record: ") + e.what());
    }
}

json to_json(const DatasetDescription& d) {
    return {{"dataset", d.dataset},
            {"subset", d.subset},
            {"summary", d.summary},
            {"task_explanation", d.task_explanation},
            {"subset_description", d.subset_description},
            {"source", source_name(d.source)}};
}

DatasetDescription description_from_json(const json& j) {
    try {
        DatasetDescription d;
        d.dataset = j.at("dataset").get<std::string>();
        d.subset = j.at("subset").get<std::string>();
        d.summary = j.at("summary").get<std::string>();
        d.task_explanation = j.at("task_explanation").get<std::string>();
        d.subset_description = j.value("subset_description", "");
        auto s = parse_source_name(j.at("source").get<std::string>());
        if (!s) throw SchemaError("unknown description source");
        d.source = *s;
        return d;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad description: ") + e.what());
    }
}

json to_json(const NormalizedRecord& r) {
    json j = to_json(r.source);
    j["record_id"] = r.record_id;
    j["canonical_model"] = canonical_name(r.canonical_model);
    j["canonical_dataset"] = r.canonical_dataset;
    j["canonical_metric"] = metric_name(r.canonical_metric);
    j["scaled_value"] = r.scaled_value;
    j["description"] = r.description ? to_json(*r.description) : json(nullptr);
    j["extras"] = r.extras;
    return j;
}

NormalizedRecord normalized_from_json(const json& j) {
    try {
        NormalizedRecord r;
        r.source = extraction_from_json(j);
        r.record_id = j.at("record_id").get<std::string>();
        auto m = parse_target_model(j.at("canonical_model").get<std::string>());
        auto metric = parse_metric_name(j.at("canonical_metric").get<std::string>());
        if (!m || !metric) throw SchemaError("unknown canonical model or metric in record " + r.record_id);
        r.canonical_model = *m;
        r.canonical_metric = *metric;
        r.canonical_dataset = j.at("canonical_dataset").get<std::string>();
        r.scaled_value = j.at("scaled_value").get<double>();
        if (j.contains("description") && !j["description"].is_null())
            r.description = description_from_json(j["description"]);
        r.extras = j.value("extras", json::object());
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad normalized record: ") + e.what());
    }
}

}  // namespace llmeval

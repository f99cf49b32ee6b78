#include "llmeval/analysis.hpp"

#include "llmeval/errors.hpp"
#include "llmeval/text_util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <thread>

namespace llmeval {

// ---------------------------------------------------------------------------
// prompt labels

std::string_view prompt_label_name(PromptLabel l) {
    switch (l) {
        case PromptLabel::Cot: return "cot";
        case PromptLabel::Direct: return "direct";
        case PromptLabel::CotVariant: return "cot_variant";
        case PromptLabel::Other: return "other";
    }
    return "other";
}

std::optional<PromptLabel> parse_prompt_label(std::string_view s) {
    auto t = text::to_lower(text::trim(s));
    if (t == "cot") return PromptLabel::Cot;
    if (t == "direct") return PromptLabel::Direct;
    if (t == "cot_variant") return PromptLabel::CotVariant;
    if (t == "other") return PromptLabel::Other;
    return std::nullopt;
}

std::string PromptLabelMap::key(std::string_view s) { return text::to_lower(text::trim(s)); }

PromptLabelMap PromptLabelMap::parse(std::string_view text) {
    PromptLabelMap m;
    std::size_t n = 0;
    for (const auto& raw : text::split_lines(text)) {
        ++n;
        if (text::trim(raw).empty() || text::trim(raw)[0] == '#') continue;
        auto tab = raw.rfind('\t');
        if (tab == std::string::npos)
            throw ConfigError("label map line " + std::to_string(n) + ": expected prompting_method<TAB>label");
        auto label = parse_prompt_label(raw.substr(tab + 1));
        if (!label) throw ConfigError("label map line " + std::to_string(n) + ": unknown label");
        m.set(raw.substr(0, tab), *label);
    }
    return m;
}

PromptLabelMap PromptLabelMap::load(const std::filesystem::path& path) { return parse(text::read_file(path)); }

void PromptLabelMap::set(std::string_view prompting_method, PromptLabel label) {
    entries_[key(prompting_method)] = label;
}

PromptLabel PromptLabelMap::label(std::string_view prompting_method) const {
    auto it = entries_.find(key(prompting_method));
    return it == entries_.end() ? PromptLabel::Other : it->second;
}

bool PromptLabelMap::contains(std::string_view prompting_method) const {
    return entries_.count(key(prompting_method)) > 0;
}

std::vector<std::string> PromptLabelMap::unmapped(const std::vector<NormalizedRecord>& records) const {
    std::set<std::string> out;
    for (const auto& r : records)
        if (!contains(r.fields().prompting_method)) out.insert(r.fields().prompting_method);
    return {out.begin(), out.end()};
}

PromptLabel PromptLabelMap::suggest(std::string_view prompting_method) {
    static const std::regex variant(
        R"(((tree|graph|skeleton)[- ]of[- ]thoughts?|\btot\b|\bgot\b|self[- ]?consisten|\bsc\b|cot[- +]?sc|majority vot|least[- ]to[- ]most|plan[- ]and[- ]solve|\bpot\b|\bpal\b|program[- ]aided|self[- ]refine|reflexion))",
        std::regex::icase);
    static const std::regex cot(R"((\bcot\b|chain[- ]of[- ]thought|step[- ]by[- ]step|rationale))", std::regex::icase);
    static const std::regex direct(
        R"((direct|standard|vanilla|\bio\b|answer[- ]only|plain|^zero[- ]shot$|^few[- ]shot$|^\d+[- ]shot$|^base$))",
        std::regex::icase);
    auto s = text::trim(prompting_method);
    if (is_missing(s) || s.empty()) return PromptLabel::Other;
    if (std::regex_search(s, variant)) return PromptLabel::CotVariant;
    if (std::regex_search(s, cot)) return PromptLabel::Cot;
    if (std::regex_search(s, direct)) return PromptLabel::Direct;
    return PromptLabel::Other;
}

std::string PromptLabelMap::draft(const std::vector<NormalizedRecord>& records) {
    std::set<std::string> seen;
    std::string out;
    for (const auto& r : records) {
        auto k = key(r.fields().prompting_method);
        if (!seen.insert(k).second) continue;
        auto raw = text::trim(r.fields().prompting_method);
        out += raw + '\t' + std::string(prompt_label_name(suggest(raw))) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// comparisons

std::string_view comparison_name(Comparison c) {
    switch (c) {
        case Comparison::CotVsDirect: return "cot_vs_direct";
        case Comparison::FewVsZero: return "few_vs_zero";
        case Comparison::MoreVsFewer: return "more_vs_fewer";
        case Comparison::FewcotVsZerocot: return "fewcot_vs_zerocot";
        case Comparison::CotVsDirectAtMatchedShots: return "cot_vs_direct_at_matched_shots";
    }
    return "cot_vs_direct";
}

std::optional<Comparison> parse_comparison(std::string_view s) {
    for (auto c : {Comparison::CotVsDirect, Comparison::FewVsZero, Comparison::MoreVsFewer,
                   Comparison::FewcotVsZerocot, Comparison::CotVsDirectAtMatchedShots})
        if (comparison_name(c) == s) return c;
    return std::nullopt;
}

std::string_view comparison_family(Comparison c) {
    return c == Comparison::CotVsDirect || c == Comparison::CotVsDirectAtMatchedShots ? "cot" : "icl";
}

CategoryIndex index_categories(const std::vector<CategoryAssignment>& assignments) {
    CategoryIndex idx;
    for (const auto& a : assignments) idx[a.record_id] = a.labels;
    return idx;
}

namespace {

std::string norm(std::string_view s) { return text::to_lower(text::trim(s)); }

std::string base_key(const NormalizedRecord& r) {
    std::string k;
    for (const auto& part : {r.source.paper_id, std::to_string(r.source.table_index),
                             std::string(canonical_name(r.canonical_model)), r.canonical_dataset,
                             norm(r.fields().subset), std::string(metric_name(r.canonical_metric))}) {
        k += part;
        k += '\x1f';
    }
    return k;
}

std::string shot_string(const NormalizedRecord& r) {
    if (auto s = r.shots()) return std::to_string(*s);
    return norm(r.fields().number_of_shots);
}

DeltaObservation make_observation(const NormalizedRecord& a, const NormalizedRecord& b, Comparison c,
                                  const CategoryIndex* categories) {
    DeltaObservation o;
    o.paper_id = a.source.paper_id;
    o.table_index = a.source.table_index;
    o.canonical_model = a.canonical_model;
    o.canonical_dataset = a.canonical_dataset;
    o.subset = a.fields().subset;
    o.canonical_metric = a.canonical_metric;
    o.shots_a = a.shots();
    o.shots_b = b.shots();
    o.value_a = a.scaled_value;
    o.value_b = b.scaled_value;
    o.delta = a.scaled_value - b.scaled_value;
    o.comparison = c;
    o.record_a = a.record_id;
    o.record_b = b.record_id;
    if (categories) {
        auto it = categories->find(a.record_id);
        if (it != categories->end()) o.categories = it->second;
    }
    return o;
}

/// Groups records by `key` (skipping empty keys) and pairs every record passing `side_a` with
/// every record passing `side_b` whenever `accept` holds, in input order.
template <class Key, class SideA, class SideB, class Accept, class Tag>
std::vector<DeltaObservation> pair_up(const std::vector<NormalizedRecord>& records, Comparison c, Key key,
                                      SideA side_a, SideB side_b, Accept accept, Tag tag,
                                      const CategoryIndex* categories) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto k = key(records[i]);
        if (k) groups[*k].push_back(i);
    }
    std::vector<DeltaObservation> out;
    for (const auto& [k, idx] : groups) {
        auto start = out.size();
        for (auto i : idx) {
            if (!side_a(records[i])) continue;
            for (auto j : idx) {
                if (i == j || !side_b(records[j]) || !accept(records[i], records[j])) continue;
                auto o = make_observation(records[i], records[j], c, categories);
                o.shot_tag = tag(records[i]);
                out.push_back(std::move(o));
            }
        }
        for (auto p = start; p < out.size(); ++p) out[p].group_pairs = out.size() - start;
    }
    return out;
}

auto no_tag = [](const NormalizedRecord&) { return std::string(); };
auto always = [](const NormalizedRecord&, const NormalizedRecord&) { return true; };

}  // namespace

std::vector<DeltaObservation> match_cot_pairs(const std::vector<NormalizedRecord>& records,
                                              const PromptLabelMap& labels, const CategoryIndex* categories) {
    auto label_is = [&](PromptLabel want) {
        return [&labels, want](const NormalizedRecord& r) { return labels.label(r.fields().prompting_method) == want; };
    };
    return pair_up(
        records, Comparison::CotVsDirect,
        [](const NormalizedRecord& r) -> std::optional<std::string> { return base_key(r) + shot_string(r); },
        label_is(PromptLabel::Cot), label_is(PromptLabel::Direct), always, no_tag, categories);
}

std::vector<DeltaObservation> match_shot_pairs(const std::vector<NormalizedRecord>& records, ShotMode mode,
                                               const CategoryIndex* categories) {
    auto key = [](const NormalizedRecord& r) -> std::optional<std::string> {
        if (!r.shots()) return std::nullopt;
        return base_key(r) + norm(r.fields().prompting_method);
    };
    auto positive = [](const NormalizedRecord& r) { return *r.shots() > 0; };
    if (mode == ShotMode::FewVsZero)
        return pair_up(
            records, Comparison::FewVsZero, key, positive, [](const NormalizedRecord& r) { return *r.shots() == 0; },
            always, no_tag, categories);
    return pair_up(
        records, Comparison::MoreVsFewer, key, positive, positive,
        [](const NormalizedRecord& a, const NormalizedRecord& b) { return *a.shots() > *b.shots(); }, no_tag,
        categories);
}

std::vector<DeltaObservation> match_joint(const std::vector<NormalizedRecord>& records, const PromptLabelMap& labels,
                                          const CategoryIndex* categories) {
    auto is = [&labels](const NormalizedRecord& r, PromptLabel l) {
        return labels.label(r.fields().prompting_method) == l;
    };
    auto fewcot = pair_up(
        records, Comparison::FewcotVsZerocot,
        [&](const NormalizedRecord& r) -> std::optional<std::string> {
            if (!r.shots() || !is(r, PromptLabel::Cot)) return std::nullopt;
            return base_key(r);
        },
        [](const NormalizedRecord& r) { return *r.shots() > 0; },
        [](const NormalizedRecord& r) { return *r.shots() == 0; }, always, no_tag, categories);

    auto matched = pair_up(
        records, Comparison::CotVsDirectAtMatchedShots,
        [](const NormalizedRecord& r) -> std::optional<std::string> {
            if (!r.shots()) return std::nullopt;
            return base_key(r) + std::to_string(*r.shots());
        },
        [&](const NormalizedRecord& r) { return is(r, PromptLabel::Cot); },
        [&](const NormalizedRecord& r) { return is(r, PromptLabel::Direct); }, always,
        [](const NormalizedRecord& r) { return std::string(*r.shots() == 0 ? "zero-shot" : "few-shot"); },
        categories);

    fewcot.insert(fewcot.end(), std::make_move_iterator(matched.begin()), std::make_move_iterator(matched.end()));
    return fewcot;
}

// ---------------------------------------------------------------------------
// summaries

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw PreconditionError("quantile of an empty sample");
    double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SummaryStats summary_stats(std::vector<double> values) {
    if (values.empty()) throw PreconditionError("summary of an empty group");
    std::sort(values.begin(), values.end());
    SummaryStats s;
    s.n = values.size();
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return s;
}

namespace {

const std::vector<std::string>& categories_or_default(const DeltaObservation& o) {
    static const std::vector<std::string> none = {"Uncategorized"};
    return o.categories.empty() ? none : o.categories;
}

}  // namespace

std::vector<PaperMean> per_paper_means(const std::vector<DeltaObservation>& observations) {
    std::map<std::pair<std::string, std::string>, std::vector<double>> by;
    for (const auto& o : observations)
        for (const auto& c : categories_or_default(o)) by[{c, o.paper_id}].push_back(o.delta);
    std::vector<PaperMean> out;
    for (const auto& [k, v] : by)
        out.push_back({k.first, k.second, std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()),
                       v.size()});
    return out;
}

SummaryReport summarize(const std::vector<DeltaObservation>& observations, Grouping grouping) {
    SummaryReport report;
    if (observations.empty()) {
        report.notes.push_back("no observations; nothing summarized");
        return report;
    }
    std::map<std::string, std::vector<double>> groups;
    switch (grouping) {
        case Grouping::Overall:
            for (const auto& o : observations) groups["Overall"].push_back(o.delta);
            break;
        case Grouping::PerCategory:
            for (const auto& o : observations)
                for (const auto& c : categories_or_default(o)) groups[c].push_back(o.delta);
            break;
        case Grouping::PerPaperThenCategory:
            for (const auto& pm : per_paper_means(observations)) groups[pm.category].push_back(pm.mean);
            break;
    }
    for (auto& [g, v] : groups) report.groups.push_back({g, summary_stats(std::move(v))});
    return report;
}

// ---------------------------------------------------------------------------
// significance

double bootstrap_test(const std::vector<double>& deltas, std::size_t resamples, std::uint64_t seed) {
    if (deltas.size() < 2) throw TooFewObservations("bootstrap needs at least two deltas");
    if (resamples == 0) throw PreconditionError("resample count must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, deltas.size() - 1);
    std::size_t at_or_below = 0;
    for (std::size_t r = 0; r < resamples; ++r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < deltas.size(); ++i) sum += deltas[pick(rng)];
        if (sum <= 0.0) ++at_or_below;
    }
    return static_cast<double>(at_or_below) / static_cast<double>(resamples);
}

std::uint64_t category_seed(std::uint64_t seed, std::string_view category) {
    return text::splitmix64(seed ^ text::fnv1a64(category));
}

std::vector<StatTestResult> apply_correction(std::vector<StatTestResult> results, double alpha, int m) {
    if (m < 1) throw PreconditionError("number of tests must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0,1)");
    double threshold = alpha / static_cast<double>(m);
    for (auto& r : results) {
        r.threshold = threshold;
        r.significant = r.p_value < threshold;
    }
    return results;
}

std::vector<StatTestResult> significance_by_category(const std::vector<DeltaObservation>& observations,
                                                     std::size_t resamples, std::uint64_t seed, double alpha, int m,
                                                     unsigned workers) {
    std::map<std::string, std::vector<double>> by_category;
    for (const auto& o : observations)
        for (const auto& c : categories_or_default(o)) by_category[c].push_back(o.delta);
    std::map<std::string, std::vector<double>> paper_means;
    for (const auto& pm : per_paper_means(observations)) paper_means[pm.category].push_back(pm.mean);

    std::vector<StatTestResult> results;
    std::vector<const std::vector<double>*> samples;
    for (const auto& [c, v] : by_category) {
        if (v.size() < 2) continue;
        StatTestResult r;
        r.category = c;
        r.n = v.size();
        r.mean_delta = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        const auto& pm = paper_means[c];
        r.mean_of_paper_means = std::accumulate(pm.begin(), pm.end(), 0.0) / static_cast<double>(pm.size());
        results.push_back(r);
        samples.push_back(&v);
    }

    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < std::max(1u, workers); ++w)
            pool.emplace_back([&] {
                for (auto i = next++; i < results.size(); i = next++)
                    results[i].p_value = bootstrap_test(*samples[i], resamples, category_seed(seed, results[i].category));
            });
    }
    return apply_correction(std::move(results), alpha, m);
}

std::vector<DeltaObservation> restrict_to_papers(const std::vector<DeltaObservation>& observations,
                                                 const std::vector<std::string>& papers) {
    std::set<std::string> keep(papers.begin(), papers.end());
    std::vector<DeltaObservation> out;
    for (const auto& o : observations)
        if (keep.count(o.paper_id)) out.push_back(o);
    return out;
}

// ---------------------------------------------------------------------------
// negative cases

std::map<std::string, std::vector<NegativeCase>> export_negative_cases(
    const std::vector<DeltaObservation>& observations, const std::vector<NormalizedRecord>& records) {
    std::map<std::string, const NormalizedRecord*> by_id;
    for (const auto& r : records) by_id[r.record_id] = &r;
    std::map<std::string, std::vector<NegativeCase>> out;
    for (const auto& o : observations) {
        if (!(o.delta < 0.0)) continue;
        NegativeCase c{o, std::nullopt};
        auto it = by_id.find(o.record_a);
        if (it != by_id.end()) c.description = it->second->description;
        out[std::string(comparison_family(o.comparison))].push_back(std::move(c));
    }
    return out;
}

json to_json(const NegativeCase& c) {
    const auto& o = c.observation;
    return {{"comparison", comparison_name(o.comparison)},
            {"paper_id", o.paper_id},
            {"table_index", o.table_index},
            {"model", canonical_name(o.canonical_model)},
            {"dataset", o.canonical_dataset},
            {"subset", o.subset},
            {"metric", metric_name(o.canonical_metric)},
            {"value_a", o.value_a},
            {"value_b", o.value_b},
            {"delta", o.delta},
            {"record_a", o.record_a},
            {"record_b", o.record_b},
            {"description", c.description ? to_json(*c.description) : json(nullptr)}};
}

TraitReport label_negative_traits(const std::map<std::string, std::vector<NegativeCase>>& cases,
                                  const Taxonomy& taxonomy, Gateway& gateway, const PromptTemplate& tmpl) {
    taxonomy.validate();
    std::vector<std::string> prompts;
    std::vector<std::pair<std::string, std::string>> owners;  // family, record
    for (const auto& [family, list] : cases)
        for (const auto& c : list) {
            const auto& d = c.description;
            prompts.push_back(render_category_prompt(tmpl, taxonomy, d ? d->dataset : c.observation.canonical_dataset,
                                                     d ? d->subset : c.observation.subset, description_text(d)));
            owners.emplace_back(family, c.observation.record_a);
        }
    if (prompts.empty()) throw PreconditionError("no negative cases to label");

    auto batch = gateway.complete_batch(prompts);
    TraitReport report;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        std::string label = taxonomy.fallback;
        bool flagged = true;
        if (batch.responses[i]) {
            auto parsed = parse_label_reply(*batch.responses[i], taxonomy, true);
            label = parsed.labels.front();
            flagged = parsed.flagged;
        }
        if (flagged) report.flagged.push_back(owners[i].second);
        report.counts[owners[i].first][label]++;
    }
    for (const auto& [family, counts] : report.counts) {
        std::size_t total = 0;
        for (const auto& [l, n] : counts) total += n;
        for (const auto& [l, n] : counts)
            report.ratios[family][l] = static_cast<double>(n) / static_cast<double>(total);
    }
    return report;
}

}  // namespace llmeval

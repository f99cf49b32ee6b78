#pragma once

#include "llmeval/jsonl.hpp"
#include "llmeval/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmeval {

struct NormalizedRecord {
    std::string record_id;
    ExtractionRecord source;
    TargetModel canonical_model = TargetModel::Gpt4;
    std::string canonical_dataset;
    Metric canonical_metric = Metric::Accuracy;
    double scaled_value = 0.0;
    std::optional<DatasetDescription> description;
    /// Columns carried over verbatim from an imported file.
    json extras = json::object();

    const TemplateFields& fields() const { return source.fields; }
    /// Shot count when the field holds a plain non-negative integer.
    std::optional<int> shots() const;

    bool operator==(const NormalizedRecord&) const = default;
};

/// Metric name lookup through the synonym table ("Acc", "EM", "ROUGE-L").
std::optional<Metric> canonical_metric(std::string_view name);

enum class MetricStatus { Ok, Rejected, OutOfRange };

struct MetricValue {
    MetricStatus status = MetricStatus::Rejected;
    Metric metric = Metric::Accuracy;
    double value = 0.0;
};

/// How a bounded value of exactly 1 is read: as a fraction (100) or as 1 on the percent scale.
enum class UnitHint { Percent, Fraction };

/// Bounded values in [0,1) are fractions and become percentages; (1,100] pass through.
/// Unbounded metrics pass through unscaled. Throws PreconditionError on a non-finite value.
MetricValue normalize_metric(std::string_view name, double value, UnitHint at_one = UnitHint::Percent);

/// The family a raw model name belongs to, or nullopt when it names some other model or a
/// variant the family excludes. `hint` resolves bare names such as "Claude3" or "Gemini".
std::optional<TargetModel> canonicalize_model(std::string_view raw_name, std::optional<TargetModel> hint = {});

bool is_fine_tuned(const TemplateFields& fields);

template <class R>
std::vector<R> filter_fine_tuned(const std::vector<R>& records) {
    std::vector<R> kept;
    for (const auto& r : records) {
        const TemplateFields* f;
        if constexpr (std::is_same_v<R, NormalizedRecord>) f = &r.fields();
        else f = &r.fields;
        if (!is_fine_tuned(*f)) kept.push_back(r);
    }
    return kept;
}

/// Lowercase with whitespace, hyphens and underscores removed.
std::string dataset_key(std::string_view name);

/// Curated abbreviation table. Names merge only through explicit entries; the closure
/// over entries is an equivalence relation.
class AliasTable {
public:
    AliasTable() = default;

    /// `alias<TAB>canonical` lines; '#' starts a comment. Throws ConfigError on a bad line or
    /// on an entry whose two names differ only by a version or size suffix.
    static AliasTable load(const std::filesystem::path& path);
    static AliasTable parse(std::string_view text);
    /// The table shipped in the data directory.
    static AliasTable builtin();

    void add(std::string_view alias, std::string_view canonical);
    std::string canonicalize(std::string_view name) const;
    bool same(std::string_view a, std::string_view b) const { return canonicalize(a) == canonicalize(b); }
    std::size_t size() const { return entries_; }

private:
    std::string find(const std::string& key) const;

    std::map<std::string, std::string> parent_;
    std::size_t entries_ = 0;
};

/// True when `a` and `b` differ only by a version or size marker ("flores101" vs "flores200").
bool differs_only_by_variant(std::string_view key_a, std::string_view key_b);

/// Dataset name to canonical key; fixed point on its own output.
std::string canonicalize_dataset(std::string_view name, const AliasTable& aliases);

struct DedupConflict {
    std::string key;
    std::vector<NormalizedRecord> members;
};

struct DedupResult {
    std::vector<NormalizedRecord> records;
    std::vector<DedupConflict> conflicts;
    std::size_t collapsed = 0;
};

std::string dedup_key(const NormalizedRecord& r);

/// Exact duplicates collapse to their first member; groups that disagree on value are
/// removed entirely and reported. Survivors keep input order.
DedupResult dedup(const std::vector<NormalizedRecord>& records);

struct DroppedRecord {
    std::string record_id;
    std::string reason;
};

struct NormalizeResult {
    std::vector<NormalizedRecord> records;
    std::vector<DroppedRecord> dropped;
    std::vector<DedupConflict> conflicts;
};

/// Description outcome per (paper, dataset, subset); nullopt marks an invalid description.
using DescriptionIndex = std::map<std::string, std::optional<DatasetDescription>>;

std::string description_key(std::string_view paper_id, std::string_view dataset, std::string_view subset);

struct NormalizeOptions {
    const AliasTable* aliases = nullptr;
    /// When set, records without a valid description are dropped.
    const DescriptionIndex* descriptions = nullptr;
};

/// Stable id for the `ordinal`-th record extracted from one table for one target.
std::string make_record_id(const ExtractionRecord& r, std::size_t ordinal);

/// Raw extraction records to normalized ones: fine-tune filter, metric whitelist and
/// scaling, model and dataset canonicalization, description join, then dedup.
NormalizeResult normalize_records(const std::vector<ExtractionRecord>& records, const NormalizeOptions& options);

/// Re-validates already normalized records without rescaling; a fixed point on its output.
NormalizeResult normalize_records(const std::vector<NormalizedRecord>& records, const NormalizeOptions& options);

json to_json(const NormalizedRecord& r);
NormalizedRecord normalized_from_json(const json& j);
json to_json(const TemplateFields& f);
TemplateFields fields_from_json(const json& j);
json to_json(const ExtractionRecord& r);
ExtractionRecord extraction_from_json(const json& j);
json to_json(const DatasetDescription& d);
DatasetDescription description_from_json(const json& j);

}  // namespace llmeval

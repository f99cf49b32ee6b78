#pragma once

#include "llmeval/analysis.hpp"
#include "llmeval/dblp.hpp"
#include "llmeval/normalize.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace llmeval {

inline constexpr int kStoreVersion = 1;

/// Line-delimited file whose first line is `{"llmeval_store": <version>, "kind": <kind>}`.
/// Throws SchemaError on a wrong kind or an unknown version, IoError on a missing file.
std::vector<json> read_store(const std::filesystem::path& path, std::string_view kind);
void write_store(const std::filesystem::path& path, std::string_view kind, const std::vector<json>& rows);

inline constexpr std::string_view kRecordsKind = "normalized_records";

/// Throws SchemaError on duplicate record ids.
void write_records(const std::filesystem::path& path, const std::vector<NormalizedRecord>& records);
std::vector<NormalizedRecord> read_records(const std::filesystem::path& path);

struct StatsOverview {
    std::size_t total_records = 0;
    std::size_t unique_datasets = 0;
    std::size_t source_papers = 0;
    std::size_t unique_tables = 0;
    std::map<std::string, std::size_t> per_model;
    std::size_t missing_subset = 0;
    std::size_t missing_prompting = 0;
    std::size_t missing_shots = 0;
    std::map<std::string, std::size_t> description_sources;

    bool operator==(const StatsOverview&) const = default;
};

StatsOverview stats_overview(const std::vector<NormalizedRecord>& records);
json to_json(const StatsOverview& s);
/// Two-column text table in the order of the published overview.
std::string format_stats(const StatsOverview& s);

/// `n` records, at most one per source paper, chosen by a seeded generator.
/// Throws InsufficientPapers when fewer than `n` papers are present.
std::vector<NormalizedRecord> export_annotation_sample(const std::vector<NormalizedRecord>& records, std::size_t n,
                                                       std::uint64_t seed);
/// Annotation rows: provenance, the seven template attributes and the pre-normalization snapshot.
json annotation_row(const NormalizedRecord& r);

// Reports -------------------------------------------------------------------

std::string observations_csv(const std::vector<DeltaObservation>& observations);
std::string paper_means_csv(const std::vector<PaperMean>& means);
std::string summaries_csv(const std::string& comparison, const SummaryReport& report);
/// Category, Mean Δ, p-value, Significant, once for all results and once for the filtered set.
std::string significance_table_csv(const std::vector<StatTestResult>& total,
                                   const std::vector<StatTestResult>& filtered);
std::string trend_csv(const std::vector<TrendCell>& cells, bool log_scale = false);
std::string stats_csv(const StatsOverview& s);
std::string trait_ratios_csv(const TraitReport& r);
std::string venue_report_csv(const VenueReport& r);

/// Column names of a published file, keyed by our field names. Unmapped columns are kept
/// verbatim in each record's extras.
struct ImportMapping {
    std::map<std::string, std::vector<std::string>> columns;

    /// Candidate names tried in order for each field.
    static ImportMapping defaults();
    static ImportMapping from_json(const json& j);
};

struct ImportReport {
    std::size_t rows = 0;
    std::size_t imported = 0;
    /// Row number (1-based) and why it could not be represented.
    std::vector<std::pair<std::size_t, std::string>> rejected;
    std::vector<std::string> unmapped_columns;
};

/// Reads a JSON array or JSONL export of the released records. Values are taken as already
/// normalized; nothing is rescaled, deduplicated or filtered.
std::vector<NormalizedRecord> import_released(const std::filesystem::path& path, const ImportMapping& mapping,
                                              ImportReport* report = nullptr);

}  // namespace llmeval

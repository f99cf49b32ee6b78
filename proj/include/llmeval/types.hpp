#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmeval {

/// Placeholder for attributes a source paper does not report.
inline constexpr std::string_view kMissing = "xx";

inline bool is_missing(std::string_view v) { return v == kMissing; }

enum class TargetModel { Gpt4, Gpt4o, Claude3Opus, Gemini10Pro };

inline constexpr std::array<TargetModel, 4> kAllTargets = {
    TargetModel::Gpt4, TargetModel::Gpt4o, TargetModel::Claude3Opus, TargetModel::Gemini10Pro};

/// Canonical store name: "GPT-4", "GPT-4o", "Claude3-Opus", "Gemini1.0-Pro".
std::string_view canonical_name(TargetModel m);

/// Name used when prompting for this target ("Claude3 Opus", "Gemini 1.0 Pro").
std::string_view prompt_name(TargetModel m);

std::optional<TargetModel> parse_target_model(std::string_view canonical);

/// The approved metric set. Anything else is rejected during normalization.
enum class Metric {
    Accuracy,
    ExactMatch,
    F1,
    Bleu,
    Rouge,
    Mrr,
    Precision,
    Recall,
    PearsonCorrelation,
    Mae,
    Mse,
};

inline constexpr std::array<Metric, 11> kAllMetrics = {
    Metric::Accuracy, Metric::ExactMatch, Metric::F1,     Metric::Bleu,
    Metric::Rouge,    Metric::Mrr,        Metric::Precision, Metric::Recall,
    Metric::PearsonCorrelation, Metric::Mae, Metric::Mse};

std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric_name(std::string_view exact_name);

/// Bounded metrics live on a 0-100 scale after normalization.
inline bool is_bounded(Metric m) {
    return m != Metric::PearsonCorrelation && m != Metric::Mae && m != Metric::Mse;
}

/// The eight attributes of the extraction template, all kept as raw strings.
struct TemplateFields {
    std::string value{kMissing};
    std::string dataset{kMissing};
    std::string dataset_citation_tag{kMissing};
    std::string subset{kMissing};
    std::string model_name{kMissing};
    std::string metric{kMissing};
    std::string prompting_method{kMissing};
    std::string number_of_shots{kMissing};

    bool operator==(const TemplateFields&) const = default;
};

/// Field names in template order; shared by the parser, the prompts and the store.
inline constexpr std::array<std::string_view, 8> kTemplateKeys = {
    "value",      "dataset", "dataset_citation_tag", "subset",
    "model_name", "metric",  "prompting_method",     "number_of_shots"};

std::string& field_ref(TemplateFields& f, std::string_view key);
const std::string& field_ref(const TemplateFields& f, std::string_view key);

struct ExtractionRecord {
    std::string paper_id;
    int table_index = 0;
    TargetModel target = TargetModel::Gpt4;
    TemplateFields fields;
    /// Snapshot of the table-only extraction, before context augmentation.
    std::optional<TemplateFields> original_extracted;
    std::vector<std::string> flags;

    bool operator==(const ExtractionRecord&) const = default;
};

enum class DescriptionSource { InternalKnowledge, TablePaper, LinkedDatasetPaper };

std::string_view source_name(DescriptionSource s);
std::optional<DescriptionSource> parse_source_name(std::string_view s);

struct DatasetDescription {
    std::string dataset;
    std::string subset;
    std::string summary;
    std::string task_explanation;
    std::string subset_description;
    DescriptionSource source = DescriptionSource::InternalKnowledge;

    bool operator==(const DatasetDescription&) const = default;
};

}  // namespace llmeval

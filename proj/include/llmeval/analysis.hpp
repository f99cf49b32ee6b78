#pragma once

#include "llmeval/categorize.hpp"
#include "llmeval/normalize.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace llmeval {

enum class PromptLabel { Cot, Direct, CotVariant, Other };

std::string_view prompt_label_name(PromptLabel l);
std::optional<PromptLabel> parse_prompt_label(std::string_view s);

/// The one manual input of the analyses: which prompting strings are CoT and which are direct.
class PromptLabelMap {
public:
    /// `prompting_method<TAB>cot|direct|cot_variant|other` per line; '#' starts a comment.
    static PromptLabelMap parse(std::string_view text);
    static PromptLabelMap load(const std::filesystem::path& path);

    void set(std::string_view prompting_method, PromptLabel label);
    /// Unmapped strings are Other.
    PromptLabel label(std::string_view prompting_method) const;
    bool contains(std::string_view prompting_method) const;
    std::size_t size() const { return entries_.size(); }

    /// Distinct prompting strings of `records` that have no entry, sorted.
    std::vector<std::string> unmapped(const std::vector<NormalizedRecord>& records) const;

    /// Keyword heuristic used to draft a map for human review.
    static PromptLabel suggest(std::string_view prompting_method);
    /// A draft covering every prompting string in `records`, in TSV form.
    static std::string draft(const std::vector<NormalizedRecord>& records);

private:
    static std::string key(std::string_view s);
    std::map<std::string, PromptLabel> entries_;
};

enum class Comparison { CotVsDirect, FewVsZero, MoreVsFewer, FewcotVsZerocot, CotVsDirectAtMatchedShots };

std::string_view comparison_name(Comparison c);
std::optional<Comparison> parse_comparison(std::string_view s);
/// "cot" for CoT-versus-direct comparisons, "icl" for demonstration-count comparisons.
std::string_view comparison_family(Comparison c);

struct DeltaObservation {
    std::string paper_id;
    int table_index = 0;
    TargetModel canonical_model = TargetModel::Gpt4;
    std::string canonical_dataset;
    std::string subset;
    Metric canonical_metric = Metric::Accuracy;
    std::optional<int> shots_a;
    std::optional<int> shots_b;
    double value_a = 0.0;
    double value_b = 0.0;
    double delta = 0.0;
    Comparison comparison = Comparison::CotVsDirect;
    /// "zero-shot" or "few-shot" for matched-shot comparisons, empty otherwise.
    std::string shot_tag;
    std::vector<std::string> categories;
    std::string record_a;
    std::string record_b;
    /// Number of pairs the observation's matching group produced.
    std::size_t group_pairs = 1;

    bool operator==(const DeltaObservation&) const = default;
};

/// Category labels per record id, used to tag observations by their first record.
using CategoryIndex = std::map<std::string, std::vector<std::string>>;

CategoryIndex index_categories(const std::vector<CategoryAssignment>& assignments);

/// Every cot record against every direct record sharing paper, table, model, dataset,
/// subset, metric and shot string. Missing shots on both sides count as equal here.
std::vector<DeltaObservation> match_cot_pairs(const std::vector<NormalizedRecord>& records,
                                              const PromptLabelMap& labels, const CategoryIndex* categories = nullptr);

enum class ShotMode { FewVsZero, MoreVsFewer };

/// Pairs within the same prompting string; records without an integer shot count never pair.
std::vector<DeltaObservation> match_shot_pairs(const std::vector<NormalizedRecord>& records, ShotMode mode,
                                               const CategoryIndex* categories = nullptr);

/// Few-shot CoT against zero-shot CoT, and CoT against direct at each fixed integer shot count.
std::vector<DeltaObservation> match_joint(const std::vector<NormalizedRecord>& records, const PromptLabelMap& labels,
                                          const CategoryIndex* categories = nullptr);

struct SummaryStats {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double mean = 0.0;
    std::size_t n = 0;
};

/// Linear interpolation between order statistics; `sorted` must be non-empty and ascending.
double quantile(const std::vector<double>& sorted, double q);
/// Throws PreconditionError on an empty input.
SummaryStats summary_stats(std::vector<double> values);

enum class Grouping { Overall, PerCategory, PerPaperThenCategory };

struct GroupSummary {
    std::string group;
    SummaryStats stats;
};

struct SummaryReport {
    std::vector<GroupSummary> groups;
    std::vector<std::string> notes;
};

/// Uncategorized observations fall in group "Uncategorized" for the per-category groupings.
SummaryReport summarize(const std::vector<DeltaObservation>& observations, Grouping grouping);

struct PaperMean {
    std::string category;
    std::string paper_id;
    double mean = 0.0;
    std::size_t n = 0;
};

std::vector<PaperMean> per_paper_means(const std::vector<DeltaObservation>& observations);

inline constexpr std::size_t kDefaultResamples = 100000;

/// One-sided test of mean delta > 0: the share of resample means at or below zero.
/// Throws TooFewObservations below two deltas.
double bootstrap_test(const std::vector<double>& deltas, std::size_t resamples, std::uint64_t seed);

/// Seed of the independent substream used for one category.
std::uint64_t category_seed(std::uint64_t seed, std::string_view category);

struct StatTestResult {
    std::string category;
    std::size_t n = 0;
    double mean_delta = 0.0;
    double mean_of_paper_means = 0.0;
    double p_value = 1.0;
    double threshold = 0.05;
    bool significant = false;
};

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr int kDefaultTests = 22;

/// threshold = alpha / m; significant = p < threshold.
std::vector<StatTestResult> apply_correction(std::vector<StatTestResult> results, double alpha = kDefaultAlpha,
                                             int m = kDefaultTests);

/// Bootstraps every category with at least two observations, in parallel; results do not
/// depend on `workers`. Categories come back in name order.
std::vector<StatTestResult> significance_by_category(const std::vector<DeltaObservation>& observations,
                                                     std::size_t resamples, std::uint64_t seed,
                                                     double alpha = kDefaultAlpha, int m = kDefaultTests,
                                                     unsigned workers = 4);

/// Keeps observations whose paper is in `papers`.
std::vector<DeltaObservation> restrict_to_papers(const std::vector<DeltaObservation>& observations,
                                                 const std::vector<std::string>& papers);

struct NegativeCase {
    DeltaObservation observation;
    std::optional<DatasetDescription> description;
};

/// Observations with delta < 0, joined to the description of their first record and
/// grouped by comparison family.
std::map<std::string, std::vector<NegativeCase>> export_negative_cases(
    const std::vector<DeltaObservation>& observations, const std::vector<NormalizedRecord>& records);

json to_json(const NegativeCase& c);

struct TraitReport {
    /// family -> label -> share of that family's cases.
    std::map<std::string, std::map<std::string, double>> ratios;
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    std::vector<std::string> flagged;
};

/// Single-label classification of each case's description. Throws PreconditionError when
/// there are no cases.
TraitReport label_negative_traits(const std::map<std::string, std::vector<NegativeCase>>& cases,
                                  const Taxonomy& taxonomy, Gateway& gateway, const PromptTemplate& tmpl);

}  // namespace llmeval

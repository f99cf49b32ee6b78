#pragma once

#include "llmeval/gateway.hpp"
#include "llmeval/normalize.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace llmeval {

enum class SkillCategory {
    Knowledge,
    Reasoning,
    Math,
    Coding,
    Multimodality,
    InstructionFollowing,
    Safety,
    Multilinguality,
    ToolUse,
    Other,
};

inline constexpr std::array<SkillCategory, 10> kAllCategories = {
    SkillCategory::Knowledge,     SkillCategory::Reasoning,           SkillCategory::Math,
    SkillCategory::Coding,        SkillCategory::Multimodality,       SkillCategory::InstructionFollowing,
    SkillCategory::Safety,        SkillCategory::Multilinguality,     SkillCategory::ToolUse,
    SkillCategory::Other};

/// Stable label key; "Tool Use" rather than its longer display name.
std::string_view category_name(SkillCategory c);
std::optional<SkillCategory> parse_category(std::string_view name);

/// A label set shown to the model, each with a one-line definition.
struct Taxonomy {
    std::vector<std::string> labels;
    std::vector<std::string> definitions;
    /// Used when nothing recognizable comes back; never combined with another label.
    std::string fallback = "Other";

    static Taxonomy skills();
    /// The finer reasoning-type labels used for the significance table.
    static Taxonomy reasoning_types();
    /// Characteristics of datasets where a prompting technique hurt.
    static Taxonomy negative_traits();

    /// Throws PreconditionError when empty.
    void validate() const;
    std::string render() const;
    /// Case-insensitive lookup of one reply token; also accepts "Label (gloss)" forms.
    std::optional<std::string> match(std::string_view token) const;
};

struct LabelParse {
    std::vector<std::string> labels;
    bool flagged = false;
};

/// Splits a reply on commas, semicolons and newlines. Unknown tokens are dropped; an empty
/// result falls back to the taxonomy's fallback label and is flagged. With `single`, only the
/// first recognized label is kept.
LabelParse parse_label_reply(std::string_view reply, const Taxonomy& taxonomy, bool single = false);

struct CategoryAssignment {
    std::string record_id;
    /// In taxonomy order, never empty.
    std::vector<std::string> labels;
    bool flagged = false;
    std::string note;

    bool operator==(const CategoryAssignment&) const = default;
};

json to_json(const CategoryAssignment& a);
CategoryAssignment assignment_from_json(const json& j);

/// Text shown for a description, or an empty string for none.
std::string description_text(const std::optional<DatasetDescription>& d);

std::string render_category_prompt(const PromptTemplate& tmpl, const Taxonomy& taxonomy, const std::string& dataset,
                                   const std::string& subset, const std::string& description);

CategoryAssignment categorize_record(const NormalizedRecord& record, Gateway& gateway, const PromptTemplate& tmpl);

CategoryAssignment alt_categorize_record(const NormalizedRecord& record, const Taxonomy& taxonomy, Gateway& gateway,
                                         const PromptTemplate& tmpl);

/// One call per unique (canonical dataset, subset, description); the result fans out to
/// every record sharing it. Output is in record order.
std::vector<CategoryAssignment> categorize_records(const std::vector<NormalizedRecord>& records,
                                                   const Taxonomy& taxonomy, Gateway& gateway,
                                                   const PromptTemplate& tmpl);

struct TrendCell {
    std::string label;
    std::string quarter;
    std::size_t count = 0;

    bool operator==(const TrendCell&) const = default;
};

/// Distinct (paper, dataset, subset) triples per (label, quarter), sorted by label then quarter.
/// `assignments` is matched to `records` by record id; unassigned records are skipped.
std::vector<TrendCell> quarterly_trend(const std::vector<NormalizedRecord>& records,
                                       const std::vector<CategoryAssignment>& assignments);

}  // namespace llmeval

#pragma once

#include "llmeval/gateway.hpp"
#include "llmeval/latex.hpp"
#include "llmeval/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmeval {

/// A target model with the name patterns that decide which table rows belong to it.
struct TargetSpec {
    TargetModel model = TargetModel::Gpt4;
    /// Lowercase substrings marking variant models that must not be credited to `model`.
    std::vector<std::string> variant_exclusions;
    /// Dated or re-released names that still count as `model`.
    std::vector<std::string> version_inclusions;

    static TargetSpec for_model(TargetModel m);
    /// Throws ConfigError when the pattern sets overlap.
    void validate() const;
};

struct ParseIssue {
    std::size_t line = 0;  // 1-based
    std::string text;
    std::string message;
};

struct TemplateParse {
    std::vector<TemplateFields> records;
    std::vector<ParseIssue> errors;
};

/// Tolerant reading of key/value objects: single or double quotes, bare numbers,
/// trailing commas and surrounding prose are accepted; unknown keys are ignored and
/// missing keys become "xx". Every `{...}` on a line yields one record. A line that
/// opens an object but yields none is reported in `errors` and skipped.
TemplateParse parse_record_template(std::string_view text);

/// One record in the template's key order, as a single JSON line.
std::string format_record_line(const TemplateFields& fields);

struct ParsedValue {
    double value = 0.0;
    /// The cell held more than one number ("12 / 34"); the first was taken.
    bool multi_number = false;
};

/// Strips bold/italic markup, `$`, percent signs and a `± sigma` suffix, then reads the
/// leading decimal number. nullopt when nothing numeric remains.
std::optional<ParsedValue> strip_value_markup(std::string_view raw);

inline constexpr std::string_view kFailedMarker = "<FAILED>";

struct ExtractionOutcome {
    bool no_target_model = false;
    std::vector<ExtractionRecord> records;
    std::vector<ParseIssue> errors;
};

std::string render_extraction_prompt(const PromptTemplate& tmpl, const TableCandidate& candidate,
                                     TargetModel target);

/// Turns an extraction reply into provenance-stamped records.
ExtractionOutcome interpret_extraction_reply(std::string_view reply, const TableCandidate& candidate,
                                             TargetModel target);

ExtractionOutcome extract_records(const TableCandidate& candidate, TargetModel target, Gateway& gateway,
                                  const PromptTemplate& tmpl);

struct AugmentOutcome {
    std::vector<ExtractionRecord> records;
    bool count_mismatch = false;
    /// "<record index>:<field>" for each concrete value the reply tried to erase.
    std::vector<std::string> regressions;
    std::vector<ParseIssue> errors;
};

std::string render_augmentation_prompt(const PromptTemplate& tmpl, const std::vector<ExtractionRecord>& records,
                                       const TableCandidate& candidate, const ContextText& context);

/// Applies an augmentation reply. The output always has one record per input record:
/// on a count mismatch the originals come back flagged. A concrete field is never
/// replaced by "xx"; such attempts keep the old value and are flagged. Every output
/// record carries the pre-augmentation snapshot in `original_extracted`.
AugmentOutcome apply_augmentation_reply(const std::vector<ExtractionRecord>& records, std::string_view reply);

AugmentOutcome augment_records(const std::vector<ExtractionRecord>& records, const TableCandidate& candidate,
                               const ContextText& context, Gateway& gateway, const PromptTemplate& tmpl);

}  // namespace llmeval

#pragma once

#include "llmeval/gateway.hpp"
#include "llmeval/latex.hpp"
#include "llmeval/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace llmeval {

/// Emitted by the model instead of a description when it does not know the dataset.
inline constexpr std::string_view kRefusalToken = "<UNSURE>";

struct Refusal {
    std::string reason;  // "refused" or "parse-error"
};

struct DescriptionTemplates {
    PromptTemplate knowledge;
    PromptTemplate grounded;

    static DescriptionTemplates load(const std::filesystem::path& dir = LLMEVAL_PROMPT_DIR);
};

/// Dataset and subset joined into the single query the prompts use.
std::string description_query(std::string_view dataset, std::string_view subset);

/// Reads the three headed sections. nullopt when the summary or task section is
/// missing, or when a real subset has no subset section.
std::optional<DatasetDescription> parse_description(std::string_view reply, std::string_view dataset,
                                                    std::string_view subset, DescriptionSource source);

/// Removes LaTeX commands, keeping the text of their arguments.
std::string strip_latex(std::string_view s);

std::variant<DatasetDescription, Refusal> generate_from_knowledge(const std::string& dataset,
                                                                  const std::string& subset, Gateway& gateway,
                                                                  const PromptTemplate& tmpl);

/// Grounded on `source_text`; `which` names the paper the text came from.
/// nullopt on refusal or an unparseable reply.
std::optional<DatasetDescription> generate_from_source(const std::string& dataset, const std::string& subset,
                                                       const std::string& source_text, DescriptionSource which,
                                                       Gateway& gateway, const PromptTemplate& tmpl);

/// Fetches a linked paper by arXiv id, if the corpus has it.
using PaperLookup = std::function<std::optional<PaperSource>(const std::string& arxiv_id)>;

struct DescribeResult {
    std::optional<DatasetDescription> description;
    /// Stages attempted, in order; always a prefix of knowledge, table paper, linked paper.
    std::vector<DescriptionSource> stages;
    std::string note;

    bool invalid() const { return !description.has_value(); }
};

/// Knowledge first, then the table's own paper, then the dataset paper linked through
/// the record's citation tag. Returns the first stage that succeeds.
DescribeResult describe(const TemplateFields& record, const PaperSource& table_source, const PaperLookup& resolver,
                        Gateway& gateway, const DescriptionTemplates& templates,
                        const ContextOptions& grounding = {});

}  // namespace llmeval

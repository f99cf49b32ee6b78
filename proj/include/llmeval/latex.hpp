#pragma once

#include "llmeval/corpus.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace llmeval {

struct TableCandidate {
    std::string paper_id;
    /// 1-based position among the paper's table environments.
    int table_index = 0;
    /// From `\begin{env}` through `\end{env}` inclusive.
    std::string latex;
    std::string caption;

    bool operator==(const TableCandidate&) const = default;
};

/// table, table* and sidewaystable environments in document order. Environments on
/// commented-out lines are ignored; an unclosed opener is dropped.
std::vector<TableCandidate> extract_tables(const PaperSource& source);

/// First \caption argument, or "" when there is none. Throws UnbalancedBraces.
std::string extract_caption(std::string_view table_latex);

/// Drops full-line comments and trailing `%` comments; `\%` is kept.
std::string strip_comments(std::string_view latex);

struct ContextOptions {
    /// Estimated-token budget for the context text.
    double token_budget = 120000.0;
    double tokens_per_word = 1.3;

    static constexpr double kDefaultContextLimit = 128000.0;
    static constexpr double kDefaultPromptAllowance = 8000.0;
};

struct ContextText {
    std::string paper_id;
    std::string text;
    bool truncated = false;
};

/// Section text with comments, bibliography, graphics includes and the acknowledgment /
/// reference / checklist sections removed. Over-budget text is cut back to the last
/// paragraph boundary that fits.
ContextText build_context(const PaperSource& source, const ContextOptions& options = {});

/// Estimated token count: whitespace words times `tokens_per_word`.
double estimate_tokens(std::string_view text, double tokens_per_word = 1.3);

/// arXiv id (version suffix stripped) named by the bibliography entry for `tag`, or
/// nullopt when the entry is missing or carries no arXiv marker.
std::optional<std::string> resolve_citation(std::string_view tag, const PaperSource& source);

/// The arXiv id pattern search behind resolve_citation, exposed for bib entry text.
std::optional<std::string> find_arxiv_id(std::string_view entry_text);

}  // namespace llmeval

#pragma once

#include "llmeval/gateway.hpp"
#include "llmeval/latex.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace llmeval {

inline const std::set<std::string> kDefaultKeywords = {"gpt", "claude", "gemini"};

enum class Leaderboard { Yes, No, Undetermined };

struct FilterVerdict {
    std::string paper_id;
    int table_index = 0;
    bool keyword_pass = false;
    /// Only Yes/No when keyword_pass holds; Undetermined otherwise or on unparseable replies.
    Leaderboard leaderboard = Leaderboard::Undetermined;
    std::string reason;

    /// Tables that go on to extraction: leaderboard or undetermined after passing keywords.
    bool kept() const { return keyword_pass && leaderboard != Leaderboard::No; }

    json to_json() const;
    static FilterVerdict from_json(const json& j);
    bool operator==(const FilterVerdict&) const = default;
};

/// True iff the lowercased table text contains any keyword. Throws PreconditionError
/// for an empty keyword set.
bool keyword_prefilter(const TableCandidate& candidate, const std::set<std::string>& keywords);

/// Maps a classifier reply to a verdict; nullopt for anything but true/false.
std::optional<bool> parse_leaderboard_reply(std::string_view reply);

std::string render_leaderboard_prompt(const PromptTemplate& tmpl, const TableCandidate& candidate);

/// Asks the gateway; an unparseable reply yields Undetermined (the table is kept).
Leaderboard classify_leaderboard(const TableCandidate& candidate, Gateway& gateway,
                                 const PromptTemplate& tmpl);

/// Both stages over many candidates. Only prefilter survivors reach the gateway, and
/// their prompts go out as one batch. A transport failure leaves the verdict
/// Undetermined with the error as reason.
std::vector<FilterVerdict> filter_tables(const std::vector<TableCandidate>& candidates,
                                         const std::set<std::string>& keywords, Gateway& gateway,
                                         const PromptTemplate& tmpl);

}  // namespace llmeval

#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace llmeval {

struct YearMonth {
    int year = 0;
    int month = 0;

    auto operator<=>(const YearMonth&) const = default;

    /// "2301" -> 2023-01. Throws MalformedId.
    static YearMonth from_yymm(std::string_view yymm);
    /// "2023-01".
    std::string to_string() const;
};

/// True for new-style identifiers `YYMM.NNNNN` with a valid month.
bool is_valid_arxiv_id(std::string_view id);

/// Publication month from the identifier prefix. Throws MalformedId.
YearMonth arxiv_id_to_month(std::string_view arxiv_id);

/// "2408.02718" -> "2024-Q3". Throws MalformedId.
std::string arxiv_id_to_quarter(std::string_view arxiv_id);

struct PaperSource {
    std::string arxiv_id;
    std::set<std::string> categories;
    YearMonth published;
    std::string latex;
    std::map<std::string, std::string> bibliography;
    std::string title;

    bool operator==(const PaperSource&) const = default;
};

struct CorpusFilter {
    YearMonth date_from;
    YearMonth date_to;
    std::set<std::string> categories;

    void validate() const;
    /// A paper passes when its month is inside the window and any category matches.
    bool admits(const PaperSource& paper) const;
};

struct ManifestEntry {
    std::set<std::string> categories;
    std::string title;
};

/// `arxiv_id<TAB>cat,cat,...<TAB>title` per line.
using Manifest = std::map<std::string, ManifestEntry>;
Manifest load_manifest(const std::filesystem::path& path);

/// Text files of one paper keyed by path relative to the entry root.
struct PaperFiles {
    std::map<std::string, std::string> files;

    bool has_latex() const;
};

/// Reads a per-paper directory or a `.tar.gz` / `.tgz` / `.tar` / `.gz` archive.
/// A gzip stream that is not a tar archive is taken as a single `main.tex`.
/// Throws CorruptArchive.
PaperFiles load_entry(const std::filesystem::path& entry);

/// Main file (contains \documentclass; ties go to the largest) with sibling
/// \input / \include targets inlined one level deep. Throws NoMainFile.
std::string flatten_latex(const PaperFiles& entry);

/// Entries from embedded \bibitem blocks plus any `.bib` / `.bbl` texts supplied.
std::map<std::string, std::string> extract_bibliography(
    std::string_view latex, const std::vector<std::string>& sibling_bib_texts = {});

/// Best-effort \title{...} argument with newlines folded.
std::string extract_title(std::string_view latex);

struct SkipEntry {
    std::string entry;
    std::string reason;

    bool operator==(const SkipEntry&) const = default;
};

struct ScanResult {
    std::vector<PaperSource> sources;
    std::vector<SkipEntry> skips;
};

/// One PaperSource per admissible entry under `root`, sorted by arxiv id; everything
/// else lands in `skips`. The manifest defaults to `root/manifest.tsv`.
ScanResult scan_corpus(const std::filesystem::path& root, const CorpusFilter& filter,
                       const std::optional<Manifest>& manifest = std::nullopt,
                       unsigned workers = 4);

}  // namespace llmeval

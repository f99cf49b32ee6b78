#pragma once

#include "llmeval/analysis.hpp"
#include "llmeval/corpus.hpp"
#include "llmeval/dblp.hpp"
#include "llmeval/gateway.hpp"
#include "llmeval/latex.hpp"
#include "llmeval/store.hpp"
#include "llmeval/table_filter.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace llmeval {

/// Everything a run needs besides its inputs. Read from a JSON file whose keys mirror the
/// fields; every key is optional.
struct PipelineConfig {
    GatewayConfig gateway;
    CorpusFilter corpus{{2023, 1}, {2024, 12}, {"cs.AI", "cs.CL", "cs.CV", "cs.LG"}};
    std::set<std::string> keywords = kDefaultKeywords;
    std::vector<TargetModel> targets{kAllTargets.begin(), kAllTargets.end()};
    ContextOptions context;
    bool augment = true;
    unsigned workers = 4;
    std::filesystem::path prompt_dir = LLMEVAL_PROMPT_DIR;
    /// Empty means the shipped alias table.
    std::filesystem::path aliases;
    std::filesystem::path labels;
    std::size_t resamples = kDefaultResamples;
    double alpha = kDefaultAlpha;
    int tests = kDefaultTests;
    double dblp_threshold = kDefaultTitleSimilarity;
    std::uint64_t seed = 0;

    static PipelineConfig from_json(const json& j);
    /// Throws ConfigError on unreadable or invalid configuration.
    static PipelineConfig load(const std::filesystem::path& path);
    void validate() const;
};

/// The files each stage reads and writes inside one working directory.
struct Workspace {
    std::filesystem::path dir;

    std::filesystem::path papers() const { return dir / "papers.jsonl"; }
    std::filesystem::path skipped() const { return dir / "skipped.tsv"; }
    std::filesystem::path tables() const { return dir / "tables.jsonl"; }
    std::filesystem::path verdicts() const { return dir / "verdicts.jsonl"; }
    std::filesystem::path extracted() const { return dir / "extracted.jsonl"; }
    std::filesystem::path descriptions() const { return dir / "descriptions.jsonl"; }
    std::filesystem::path records() const { return dir / "records.jsonl"; }
    std::filesystem::path dropped() const { return dir / "dropped.tsv"; }
    std::filesystem::path conflicts() const { return dir / "conflicts.jsonl"; }
    std::filesystem::path categories(std::string_view taxonomy) const {
        return dir / ("categories_" + std::string(taxonomy) + ".jsonl");
    }
    std::filesystem::path analysis() const { return dir / "analysis"; }
    std::filesystem::path reports() const { return dir / "reports"; }
};

struct StageReport {
    std::string stage;
    std::size_t processed = 0;
    std::size_t reused = 0;
    std::size_t output_rows = 0;
    std::vector<std::string> warnings;

    std::string summary() const;
};

json to_json(const PaperSource& p);
PaperSource paper_from_json(const json& j);
json to_json(const TableCandidate& t);
TableCandidate table_from_json(const json& j);
json to_json(const DeltaObservation& o);
DeltaObservation observation_from_json(const json& j);
json to_json(const StatTestResult& r);
StatTestResult stat_result_from_json(const json& j);

std::vector<PaperSource> read_papers(const Workspace& ws);
std::vector<TableCandidate> read_tables(const Workspace& ws);
DescriptionIndex read_descriptions(const Workspace& ws);
std::vector<CategoryAssignment> read_categories(const Workspace& ws, std::string_view taxonomy);

/// Stages skip work already present in their output unless `force` is set. A stage never
/// writes the file it reads.
StageReport run_ingest(const Workspace& ws, const PipelineConfig& cfg, const std::filesystem::path& corpus_root,
                       bool force = false);
StageReport run_tables(const Workspace& ws, bool force = false);
StageReport run_filter(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway, bool force = false);
StageReport run_extract(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway, bool force = false);
StageReport run_describe(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway, bool force = false);
StageReport run_normalize(const Workspace& ws, const PipelineConfig& cfg);

/// `taxonomy` is "skills" or "reasoning".
StageReport run_categorize(const Workspace& ws, const PipelineConfig& cfg, Gateway& gateway,
                           std::string_view taxonomy = "skills", bool force = false);

enum class AnalysisKind { Cot, Icl, MoreShots, Joint };

std::optional<AnalysisKind> parse_analysis_kind(std::string_view s);
std::string_view analysis_kind_name(AnalysisKind k);

struct AnalyzeOptions {
    AnalysisKind kind = AnalysisKind::Cot;
    /// Category file used to tag observations.
    std::string taxonomy = "skills";
    /// Adds a venue-filtered result set using this client.
    DblpClient* dblp = nullptr;
    /// Labels negative cases with trait categories through this gateway.
    Gateway* traits = nullptr;
};

StageReport run_analyze(const Workspace& ws, const PipelineConfig& cfg, const AnalyzeOptions& options);
StageReport run_trend(const Workspace& ws, std::string_view taxonomy = "skills", bool log_scale = false);
StageReport run_stats(const Workspace& ws);
/// Assembles the table-layout CSVs from whatever analyses exist.
StageReport run_report(const Workspace& ws);
StageReport run_sample_annotations(const Workspace& ws, std::size_t n, std::uint64_t seed);

/// Every stage in order, for a corpus and one gateway.
std::vector<StageReport> run_all(const Workspace& ws, const PipelineConfig& cfg,
                                 const std::filesystem::path& corpus_root, Gateway& gateway,
                                 DblpClient* dblp = nullptr);

}  // namespace llmeval

#include "doctest.h"

#include "builders.hpp"
#include "llmeval/errors.hpp"
#include "llmeval/store.hpp"
#include "llmeval/text_util.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace llmeval;
using fixture::make_record;
using fixture::RecordSpec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "llmeval_store_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<NormalizedRecord> generated(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const char* datasets[] = {"gsm8k", "mmlu", "svamp", "flores101", "c\"quote", "ünïcode"};
    std::vector<NormalizedRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        RecordSpec s;
        s.paper = "24" + std::to_string(10 + rng() % 3) + "." + std::to_string(10000 + rng() % 90000);
        s.table = 1 + static_cast<int>(rng() % 9);
        s.model = kAllTargets[rng() % 4];
        s.metric = kAllMetrics[rng() % kAllMetrics.size()];
        s.dataset = datasets[rng() % 6];
        s.shots = rng() % 3 ? std::to_string(rng() % 9) : "xx";
        s.value = static_cast<double>(rng() % 100000) / 1000.0;
        auto r = make_record(s, "id" + std::to_string(i));
        if (rng() % 2) r.source.original_extracted = r.source.fields;
        if (rng() % 3 == 0) r.source.flags.push_back("multi-number-cell");
        if (rng() % 2) {
            DatasetDescription d;
            d.dataset = s.dataset;
            d.subset = s.subset;
            d.summary = "line one\nline two";
            d.task_explanation = "tab\there";
            d.source = static_cast<DescriptionSource>(rng() % 3);
            r.description = d;
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

TEST_CASE("three records round trip") {
    auto p = scratch("three.jsonl");
    auto rs = generated(3, 1);
    write_records(p, rs);
    CHECK(read_records(p) == rs);
}

TEST_CASE("empty store reads as empty") {
    auto p = scratch("empty.jsonl");
    write_records(p, {});
    CHECK(read_records(p).empty());
}

TEST_CASE("a thousand records hash equal after a round trip") {
    auto p = scratch("thousand.jsonl");
    auto rs = generated(1000, 2);
    write_records(p, rs);
    auto back = read_records(p);
    auto p2 = scratch("thousand2.jsonl");
    write_records(p2, back);
    CHECK(text::sha256_hex(text::read_file(p)) == text::sha256_hex(text::read_file(p2)));
    CHECK(back == rs);
}

TEST_CASE("header checks") {
    auto p = scratch("kind.jsonl");
    write_store(p, "papers", {json{{"a", 1}}});
    CHECK(read_store(p, "papers").size() == 1);
    CHECK_THROWS_AS(read_store(p, "tables"), SchemaError);
    std::ofstream(scratch("future.jsonl")) << "{\"llmeval_store\":99,\"kind\":\"papers\"}\n";
    CHECK_THROWS_AS(read_store(scratch("future.jsonl"), "papers"), SchemaError);
    std::ofstream(scratch("headless.jsonl")) << "{\"a\":1}\n";
    CHECK_THROWS_AS(read_store(scratch("headless.jsonl"), "papers"), SchemaError);
    CHECK_THROWS_AS(read_store(scratch("missing.jsonl"), "papers"), IoError);
}

TEST_CASE("duplicate ids are refused") {
    auto rs = generated(2, 3);
    rs[1].record_id = rs[0].record_id;
    CHECK_THROWS_AS(write_records(scratch("dup.jsonl"), rs), SchemaError);
}

TEST_CASE("store lines use the template field names") {
    auto p = scratch("names.jsonl");
    write_records(p, generated(1, 4));
    auto rows = read_store(p, kRecordsKind);
    REQUIRE(rows.size() == 1);
    auto dump = rows[0].dump();
    for (auto k : kTemplateKeys) CHECK(dump.find("\"" + std::string(k) + "\"") != std::string::npos);
}

TEST_CASE("stats of an empty store") {
    auto s = stats_overview({});
    CHECK(s.total_records == 0);
    CHECK(s.unique_datasets == 0);
    CHECK(s.source_papers == 0);
    for (const auto& [m, n] : s.per_model) CHECK(n == 0);
    CHECK(s.missing_subset + s.missing_prompting + s.missing_shots == 0);
}

TEST_CASE("stats of five records") {
    std::vector<NormalizedRecord> rs;
    RecordSpec s;
    s.paper = "2401.00001";
    s.subset = "xx";
    rs.push_back(make_record(s, "1"));  // GPT-4, gsm8k, table 1
    s.table = 2;
    s.dataset = "mmlu";
    s.subset = "stem";
    s.shots = "xx";
    rs.push_back(make_record(s, "2"));
    s.model = TargetModel::Gpt4o;
    s.prompting = "xx";
    rs.push_back(make_record(s, "3"));
    s.paper = "2402.00002";
    s.table = 1;
    s.model = TargetModel::Claude3Opus;
    s.prompting = "Direct";
    s.shots = "5";
    rs.push_back(make_record(s, "4"));
    s.model = TargetModel::Gemini10Pro;
    s.dataset = "svamp";
    s.subset = "xx";
    rs.push_back(make_record(s, "5"));
    DatasetDescription d;
    d.source = DescriptionSource::TablePaper;
    rs[0].description = d;
    rs[1].description = d;
    d.source = DescriptionSource::InternalKnowledge;
    rs[2].description = d;

    auto st = stats_overview(rs);
    CHECK(st.total_records == 5);
    CHECK(st.unique_datasets == 3);
    CHECK(st.source_papers == 2);
    CHECK(st.unique_tables == 3);
    CHECK(st.per_model["GPT-4"] == 2);
    CHECK(st.per_model["GPT-4o"] == 1);
    CHECK(st.per_model["Claude3-Opus"] == 1);
    CHECK(st.per_model["Gemini1.0-Pro"] == 1);
    CHECK(st.missing_subset == 2);
    CHECK(st.missing_prompting == 1);
    CHECK(st.missing_shots == 2);
    CHECK(st.description_sources["table_paper"] == 2);
    CHECK(st.description_sources["internal_knowledge"] == 1);
    CHECK(stats_overview(rs) == st);
    CHECK(format_stats(st).find("Total records") != std::string::npos);
    CHECK(stats_csv(st).rfind("statistic,count\n", 0) == 0);
}

TEST_CASE("annotation sample") {
    std::vector<NormalizedRecord> rs;
    for (int p = 0; p < 45; ++p)
        for (int k = 0; k < 3; ++k) {
            RecordSpec s;
            s.paper = "2401." + std::to_string(10000 + p);
            s.shots = std::to_string(k);
            rs.push_back(make_record(s, std::to_string(p) + "/" + std::to_string(k)));
        }
    auto sample = export_annotation_sample(rs, 40, 11);
    CHECK(sample.size() == 40);
    std::set<std::string> papers;
    for (const auto& r : sample) papers.insert(r.source.paper_id);
    CHECK(papers.size() == 40);

    auto a = export_annotation_sample(rs, 3, 5);
    auto b = export_annotation_sample(rs, 3, 5);
    CHECK(a == b);

    std::vector<NormalizedRecord> seven(rs.begin(), rs.begin() + 21);
    CHECK_THROWS_AS(export_annotation_sample(seven, 10, 1), InsufficientPapers);
}

TEST_CASE("annotation rows carry seven attributes and the snapshot") {
    auto r = generated(1, 9)[0];
    r.source.original_extracted = TemplateFields{};
    auto row = annotation_row(r);
    CHECK(row["attributes"].size() == 7);
    CHECK(row["original_extracted_dictionary"]["value"] == "xx");
}

TEST_CASE("significance table layout") {
    StatTestResult m{"Math", 10, 14.61, 12.0, 0.0, 0.00227, true};
    StatTestResult s{"Spatial and temporal reasoning", 8, 2.1, 2.0, 0.0166, 0.00227, false};
    auto csv = significance_table_csv({m, s}, {m});
    auto lines = text::split_lines(csv);
    CHECK(lines[0] ==
          "Category,Total Mean Δ,Total p-value,Total Significant,Filtered Mean Δ,Filtered p-value,Filtered Significant");
    CHECK(lines[1] == "Math,14.61,0.0000,Yes,14.61,0.0000,Yes");
    CHECK(lines[2] == "Spatial and temporal reasoning,2.10,0.0166,No,,,");
}

TEST_CASE("empty reports keep their headers") {
    CHECK(observations_csv({}).rfind("comparison,", 0) == 0);
    CHECK(text::split_lines(observations_csv({})).size() == 1);
    CHECK(paper_means_csv({}) == "category,paper_id,mean_delta,n\n");
    CHECK(summaries_csv("cot", {}) == "comparison,group,n,mean,median,q1,q3\n");
    CHECK(text::split_lines(significance_table_csv({}, {})).size() == 1);
    CHECK(trend_csv({}) == "category,quarter,count\n");
    CHECK(trend_csv({{"Math", "2023-Q1", 10}}, true) == "category,quarter,count,log10_count\nMath,2023-Q1,10,1\n");
}

TEST_CASE("import of a released-style export") {
    auto p = scratch("released.json");
    std::ofstream(p) << R"([
 {"table_source_arxiv_id": "2401.00001", "table_index": 2, "dataset_name": "GSM8K", "subset": "xx",
  "model_name": "GPT-4", "metric": "Accuracy", "metric_value": 92.5, "prompting_method": "CoT",
  "number_of_shots": "8", "dataset_description": "free text", "categorization": "Math"},
 {"table_source_arxiv_id": "2401.00002", "dataset_name": "MMLU", "model_name": "Claude3-Opus",
  "metric": "Exact Match", "metric_value": "81.0", "prompting_method": "xx", "number_of_shots": 5},
 {"table_source_arxiv_id": "2401.00003", "dataset_name": "X", "model_name": "Llama-2", "metric": "Accuracy",
  "metric_value": 1},
 {"table_source_arxiv_id": "2401.00004", "dataset_name": "X", "model_name": "GPT-4o", "metric": "Pass@1",
  "metric_value": 1},
 "not an object"
])";
    ImportReport rep;
    auto rs = import_released(p, ImportMapping::defaults(), &rep);
    CHECK(rep.rows == 5);
    CHECK(rep.imported == 2);
    CHECK(rep.rejected.size() == 3);
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].source.paper_id == "2401.00001");
    CHECK(rs[0].source.table_index == 2);
    CHECK(rs[0].scaled_value == 92.5);
    CHECK(rs[0].fields().number_of_shots == "8");
    CHECK(rs[0].extras["categorization"] == "Math");
    CHECK(rs[0].extras["dataset_description"] == "free text");
    CHECK(rs[1].canonical_model == TargetModel::Claude3Opus);
    CHECK(rs[1].canonical_metric == Metric::ExactMatch);
    CHECK(rs[1].fields().number_of_shots == "5");
    CHECK(rs[1].scaled_value == 81.0);
    CHECK(std::find(rep.unmapped_columns.begin(), rep.unmapped_columns.end(), "categorization") !=
          rep.unmapped_columns.end());
}

TEST_CASE("import mapping overrides") {
    auto m = ImportMapping::from_json(json{{"value", "acc"}});
    CHECK(m.columns["value"] == std::vector<std::string>{"acc"});
    CHECK_THROWS_AS(ImportMapping::from_json(json{{"nonsense", "x"}}), ConfigError);
    auto p = scratch("released.jsonl");
    std::ofstream(p) << R"({"paper_id": "2401.00001", "dataset": "A", "model_name": "GPT-4", "metric": "F1", "acc": 0.5})"
                     << "\n";
    auto rs = import_released(p, m);
    REQUIRE(rs.size() == 1);
    CHECK(rs[0].scaled_value == 0.5);
}

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
//   acceptance                 all criteria
//   acceptance --criterion N   one criterion
// Criteria 4-6 read a released record export named by LLMEVAL_RELEASED_DATA. Criteria 5 and 6
// also take LLMEVAL_LABEL_MAP (prompting method -> label TSV); criterion 6 reads reasoning
// categories from the export column named by LLMEVAL_REASONING_COLUMN (default "categorization").

#include "fixture_llm.hpp"
#include "oracle.hpp"
#include "properties.hpp"
#include "snapshot.hpp"

#include "llmeval/errors.hpp"
#include "llmeval/pipeline.hpp"
#include "llmeval/text_util.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace llmeval;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kWallSeconds = 60.0;
constexpr double kBootstrapTolerance = 0.01;
constexpr std::size_t kBootstrapResamples = 100000;
constexpr int kMatcherSets = 50;
constexpr std::size_t kMatcherMaxRecords = 200;
constexpr double kFewcotMedian = 3.0, kFewcotMedianTol = 0.5;
constexpr double kFewcotQ1 = 0.4, kFewcotQ1Tol = 0.5;
constexpr double kFewcotQ3 = 9.2, kFewcotQ3Tol = 1.0;
constexpr double kMatchedZero = 1.3, kMatchedFew = 0.9, kMatchedTol = 0.5;
constexpr double kMathMean = 14.61, kMathMeanTol = 1.5;

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

bool within(double got, double want, double tol) { return std::abs(got - want) <= tol; }

// ---------------------------------------------------------------------------

Verdict fixture_determinism() {
    auto start = std::chrono::steady_clock::now();
    auto transcript = Transcript::load(fixture::data_dir() + "/transcript.jsonl");
    std::map<std::string, std::string> snaps[2];
    for (int run = 0; run < 2; ++run) {
        Workspace ws{fs::temp_directory_path() / ("llmeval_acceptance_run" + std::to_string(run))};
        fs::remove_all(ws.dir);
        fs::create_directories(ws.dir);
        PipelineConfig cfg;
        cfg.labels = fixture::data_dir() + "/prompt_labels.tsv";
        cfg.resamples = 2000;
        Gateway gw(cfg.gateway, std::make_shared<MockBackend>(transcript));
        auto dblp = RecordedDblpClient::load(fixture::data_dir() + "/dblp.json");
        for (const auto& r : run_all(ws, cfg, fixture::corpus_dir(), gw, &dblp))
            for (const auto& w : r.warnings)
                if (w.find("mock_exhausted") != std::string::npos)
                    return {false, "transcript does not cover the run: " + w};
        snaps[run] = fixture::snapshot(ws.dir);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (snaps[0] != snaps[1]) {
        for (const auto& [f, h] : snaps[0])
            if (snaps[1][f] != h) return {false, "runs differ in " + f};
        return {false, "runs produced different file sets"};
    }
    if (!snaps[0].count("records.jsonl") || !snaps[0].count("reports/table_significance_cot_reasoning.csv"))
        return {false, "record store or reports missing"};
    if (secs >= kWallSeconds) return {false, "took " + fmt(secs, 1) + " s"};
    return {true, std::to_string(snaps[0].size()) + " files identical across two runs, " + fmt(secs, 1) + " s"};
}

Verdict table_parsing() {
    Workspace ws{fs::temp_directory_path() / "llmeval_acceptance_tables"};
    fs::remove_all(ws.dir);
    fs::create_directories(ws.dir);
    run_ingest(ws, PipelineConfig{}, fixture::corpus_dir());
    run_tables(ws);
    std::set<std::tuple<std::string, int, std::string, std::string>> got, want;
    for (const auto& t : read_tables(ws)) {
        auto open = t.latex.find('{'), close = t.latex.find('}');
        got.insert({t.paper_id, t.table_index, t.latex.substr(open + 1, close - open - 1), t.caption});
    }
    for (const auto& line : text::split_lines(text::read_file(fixture::data_dir() + "/corpus_tables.tsv"))) {
        if (line.empty() || line[0] == '#') continue;
        auto f = text::split(line, '\t');
        want.insert({f[0], std::stoi(f[1]), f[2], f[3]});
    }
    if (got != want) {
        for (const auto& w : want)
            if (!got.count(w)) return {false, "missed " + std::get<0>(w) + " table " + std::to_string(std::get<1>(w))};
        return {false, "recovered " + std::to_string(got.size()) + " tables, expected " + std::to_string(want.size())};
    }
    return {true, std::to_string(want.size()) + " hand-counted tables recovered with indices"};
}

Verdict metric_normalization() {
    auto v = normalize_metric("Acc", 0.63);
    if (v.status != MetricStatus::Ok || v.metric != Metric::Accuracy || v.value != 63.0)
        return {false, "(Acc, 0.63) gave " + fmt(v.value)};
    for (auto m : kAllMetrics)
        if (normalize_metric(metric_name(m), 50.0).status != MetricStatus::Ok)
            return {false, std::string(metric_name(m)) + " rejected"};
    for (auto bad : {"Perplexity", "BERTScore", "Win Rate", "Human Eval", "xx", ""})
        if (normalize_metric(bad, 50.0).status != MetricStatus::Rejected) return {false, std::string(bad) + " accepted"};
    return {true, "(Acc, 0.63) -> (Accuracy, 63); 11 whitelist names accepted, others rejected"};
}

// ---------------------------------------------------------------------------
// released data

struct Released {
    std::vector<NormalizedRecord> records;
    std::string problem;
};

const Released& released() {
    static Released r = [] {
        Released out;
        const char* path = std::getenv("LLMEVAL_RELEASED_DATA");
        if (!path || !*path) {
            out.problem = "LLMEVAL_RELEASED_DATA is not set; the released export could not be obtained";
            return out;
        }
        try {
            out.records = import_released(path, ImportMapping::defaults());
        } catch (const std::exception& e) {
            out.problem = std::string("import failed: ") + e.what();
        }
        return out;
    }();
    return r;
}

std::optional<PromptLabelMap> label_map(std::string& problem) {
    const char* path = std::getenv("LLMEVAL_LABEL_MAP");
    if (!path || !*path) {
        problem = "LLMEVAL_LABEL_MAP is not set";
        return std::nullopt;
    }
    return PromptLabelMap::load(path);
}

Verdict stats_reproduction() {
    const auto& rel = released();
    if (!rel.problem.empty()) return {false, rel.problem};
    auto s = stats_overview(rel.records);
    std::vector<std::pair<std::string, std::size_t>> checks{
        {"total", 18127},
        {"GPT-4", 12475},
        {"GPT-4o", 4589},
        {"Claude3-Opus", 661},
        {"Gemini1.0-Pro", 402},
        {"missing subset", 2892},
        {"missing prompting", 5489},
        {"missing shots", 9081}};
    std::vector<std::size_t> got{s.total_records,        s.per_model["GPT-4"],  s.per_model["GPT-4o"],
                                 s.per_model["Claude3-Opus"], s.per_model["Gemini1.0-Pro"], s.missing_subset,
                                 s.missing_prompting,    s.missing_shots};
    for (std::size_t i = 0; i < checks.size(); ++i)
        if (got[i] != checks[i].second)
            return {false, checks[i].first + " " + std::to_string(got[i]) + " != " + std::to_string(checks[i].second)};
    return {true, "overview counts match exactly"};
}

Verdict joint_reproduction() {
    const auto& rel = released();
    if (!rel.problem.empty()) return {false, rel.problem};
    std::string problem;
    auto labels = label_map(problem);
    if (!labels) return {false, problem};
    auto obs = match_joint(rel.records, *labels);
    std::vector<double> fewcot, zero, few;
    for (const auto& o : obs) {
        if (o.comparison == Comparison::FewcotVsZerocot) fewcot.push_back(o.delta);
        else if (o.shot_tag == "zero-shot") zero.push_back(o.delta);
        else few.push_back(o.delta);
    }
    if (fewcot.empty() || zero.empty() || few.empty()) return {false, "a comparison produced no pairs"};
    auto f = summary_stats(fewcot), z = summary_stats(zero), w = summary_stats(few);
    std::string d = "fewcot median " + fmt(f.median, 2) + " q1 " + fmt(f.q1, 2) + " q3 " + fmt(f.q3, 2) +
                    "; matched zero " + fmt(z.median, 2) + " few " + fmt(w.median, 2);
    bool ok = within(f.median, kFewcotMedian, kFewcotMedianTol) && within(f.q1, kFewcotQ1, kFewcotQ1Tol) &&
              within(f.q3, kFewcotQ3, kFewcotQ3Tol) && within(z.median, kMatchedZero, kMatchedTol) &&
              within(w.median, kMatchedFew, kMatchedTol);
    return {ok, d};
}

Verdict significance_pattern() {
    const auto& rel = released();
    if (!rel.problem.empty()) return {false, rel.problem};
    std::string problem;
    auto labels = label_map(problem);
    if (!labels) return {false, problem};
    const char* col = std::getenv("LLMEVAL_REASONING_COLUMN");
    std::string column = col && *col ? col : "categorization";
    std::vector<CategoryAssignment> as;
    auto reasoning = Taxonomy::reasoning_types();
    for (const auto& r : rel.records) {
        auto it = r.extras.find(column);
        if (it == r.extras.end() || !it->is_string()) continue;
        auto parsed = parse_label_reply(it->get<std::string>(), reasoning);
        if (parsed.labels.empty()) continue;
        CategoryAssignment a;
        a.record_id = r.record_id;
        a.labels = parsed.labels;
        as.push_back(a);
    }
    if (as.empty()) return {false, "no reasoning categories found in export column '" + column + "'"};
    auto index = index_categories(as);
    auto obs = match_cot_pairs(rel.records, *labels, &index);
    auto results = significance_by_category(obs, kDefaultResamples, 0);
    std::map<std::string, StatTestResult> by;
    for (const auto& r : results) by[r.category] = r;
    std::vector<std::pair<std::string, bool>> want{
        {"Math", true},
        {"Symbolic and algorithmic", true},
        {"Spatial and temporal reasoning", false},
        {"Logical reasoning", false},
        {"Commonsense reasoning", false},
        {"Encyclopedic knowledge", false},
        {"Generation", false},
        {"Text classification", false},
        {"Entailment", false}};
    for (const auto& [cat, sig] : want) {
        if (!by.count(cat)) return {false, cat + " has no result"};
        if (by[cat].significant != sig) return {false, cat + " significance flag differs (p=" + fmt(by[cat].p_value, 4) + ")"};
    }
    if (!within(by["Math"].mean_delta, kMathMean, kMathMeanTol))
        return {false, "Math mean delta " + fmt(by["Math"].mean_delta, 2)};
    return {true, "flags match; Math mean delta " + fmt(by["Math"].mean_delta, 2)};
}

// ---------------------------------------------------------------------------

Verdict bootstrap_oracle() {
    // every multiset of size 2..5 drawn from {-3..3}
    std::size_t sets = 0;
    double worst = 0;
    std::string worst_set;
    std::function<void(std::vector<double>&, int)> walk = [&](std::vector<double>& cur, int lo) {
        if (cur.size() >= 2) {
            ++sets;
            double exact = oracle::exhaustive_p(cur);
            double est = bootstrap_test(cur, kBootstrapResamples, 1000 + sets);
            if (std::abs(est - exact) > worst) {
                worst = std::abs(est - exact);
                std::ostringstream s;
                for (auto x : cur) s << x << ' ';
                worst_set = s.str();
            }
        }
        if (cur.size() == 5) return;
        for (int v = lo; v <= 3; ++v) {
            cur.push_back(v);
            walk(cur, v);
            cur.pop_back();
        }
    };
    std::vector<double> cur;
    walk(cur, -3);
    for (double x : {-1.0, 0.0, 2.0}) {
        try {
            bootstrap_test({x}, 10, 1);
            return {false, "a single delta was accepted"};
        } catch (const TooFewObservations&) {
        }
    }
    double pm = bootstrap_test({1.0, -1.0}, kBootstrapResamples, 7);
    std::string d = std::to_string(sets) + " multisets, max |p - exact| " + fmt(worst, 4) + " at {" + worst_set +
                    "}; {+1,-1} -> " + fmt(pm, 4);
    return {worst <= kBootstrapTolerance && within(pm, 0.75, kBootstrapTolerance), d};
}

Verdict matcher_oracle() {
    auto o = prop::matchers_agree_with_oracle(kMatcherSets, kMatcherMaxRecords, 8080);
    return {o.ok() || (o.cases == static_cast<std::size_t>(kMatcherSets) && o.failures == 0),
            std::to_string(o.cases) + " sets of up to " + std::to_string(kMatcherMaxRecords) + " records" +
                (o.failures ? "; " + o.first_failure : "")};
}

Verdict property_suites() {
    std::size_t passed = 0;
    auto all = prop::all();
    std::string failing;
    for (const auto& o : all) {
        if (o.ok()) ++passed;
        else failing += " [" + o.name + ": " + o.first_failure + "]";
    }
    return {passed == all.size(), std::to_string(passed) + "/" + std::to_string(all.size()) + " properties at " +
                                      std::to_string(prop::kCases) + " cases each" + failing};
}

const std::vector<std::pair<std::string, Verdict (*)()>> kCriteria{
    {"fixture pipeline determinism", fixture_determinism},
    {"table parsing", table_parsing},
    {"metric normalization", metric_normalization},
    {"stats reproduction on released data", stats_reproduction},
    {"joint-behavior reproduction on released data", joint_reproduction},
    {"significance pattern on released data", significance_pattern},
    {"bootstrap oracle", bootstrap_oracle},
    {"matcher oracle", matcher_oracle},
    {"property suites", property_suites},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::size_t> which;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) which.push_back(std::stoul(argv[++i]));
        else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 2;
        }
    }
    if (which.empty())
        for (std::size_t n = 1; n <= kCriteria.size(); ++n) which.push_back(n);
    bool all_ok = true;
    for (auto n : which) {
        if (n < 1 || n > kCriteria.size()) {
            std::cerr << "no criterion " << n << '\n';
            return 2;
        }
        Verdict v;
        try {
            v = kCriteria[n - 1].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        all_ok = all_ok && v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << kCriteria[n - 1].first
                  << "): " << v.detail << std::endl;
    }
    return all_ok ? 0 : 1;
}

#include "doctest.h"

#include "builders.hpp"
#include "llmeval/categorize.hpp"
#include "llmeval/errors.hpp"

#include <atomic>

using namespace llmeval;
using fixture::make_record;
using fixture::RecordSpec;

namespace {

const PromptTemplate& tmpl() {
    static const auto t = load_prompt("categorize");
    return t;
}

Gateway replying(std::function<std::string(const std::string&)> f) {
    GatewayConfig cfg;
    cfg.retry_limit = 0;
    return Gateway(cfg, std::make_shared<CallbackBackend>(std::move(f)));
}

/// Labels a dataset by the name line of the prompt.
std::string by_name(const std::string& prompt) {
    if (prompt.find("Dataset: GSM8K") != std::string::npos) return "Math, Reasoning";
    if (prompt.find("Dataset: CommonsenseQA") != std::string::npos) return "Reasoning, Knowledge";
    if (prompt.find("Dataset: Last Letter") != std::string::npos) return "Symbolic and algorithmic";
    return "Banana";
}

NormalizedRecord rec(const std::string& id, const std::string& paper, const std::string& dataset,
                     const std::string& subset = "xx", const std::string& shots = "0") {
    RecordSpec s;
    s.paper = paper;
    s.dataset = dataset;
    s.subset = subset;
    s.shots = shots;
    return make_record(s, id);
}

}  // namespace

TEST_CASE("taxonomy shapes") {
    CHECK(kAllCategories.size() == 10);
    auto skills = Taxonomy::skills();
    CHECK(skills.labels.size() == 10);
    CHECK(skills.labels.back() == "Other");
    CHECK(category_name(SkillCategory::ToolUse) == "Tool Use");
    CHECK(parse_category("Instruction Following") == SkillCategory::InstructionFollowing);
    CHECK(Taxonomy::reasoning_types().labels.size() == 11);
    Taxonomy empty;
    empty.labels.clear();
    CHECK_THROWS_AS(empty.validate(), PreconditionError);
}

TEST_CASE("label matching") {
    auto t = Taxonomy::skills();
    CHECK(t.match("math") == "Math");
    CHECK(t.match(" Tool Use (Agent Framework) ") == "Tool Use");
    CHECK(t.match("instruction following") == "Instruction Following");
    CHECK_FALSE(t.match("Banana"));
}

TEST_CASE("label reply parsing") {
    auto t = Taxonomy::skills();
    auto a = parse_label_reply("Reasoning, Math; Banana\nKnowledge", t);
    CHECK(a.labels == std::vector<std::string>{"Knowledge", "Reasoning", "Math"});
    CHECK_FALSE(a.flagged);
    auto b = parse_label_reply("Banana", t);
    CHECK(b.labels == std::vector<std::string>{"Other"});
    CHECK(b.flagged);
    auto c = parse_label_reply("Other, Math", t);
    CHECK(c.labels == std::vector<std::string>{"Math"});
    auto d = parse_label_reply("Math, Coding", t, true);
    CHECK(d.labels == std::vector<std::string>{"Math"});
}

TEST_CASE("categorization follows the reply") {
    auto gw = replying(by_name);
    auto g = rec("g", "2301.00001", "gsm8k");
    g.source.fields.dataset = "GSM8K";
    auto a = categorize_record(g, gw, tmpl());
    CHECK(std::find(a.labels.begin(), a.labels.end(), "Math") != a.labels.end());
    CHECK(a.record_id == "g");

    auto c = rec("c", "2301.00001", "commonsenseqa");
    c.source.fields.dataset = "CommonsenseQA";
    auto b = categorize_record(c, gw, tmpl());
    CHECK(std::find(b.labels.begin(), b.labels.end(), "Reasoning") != b.labels.end());

    auto x = rec("x", "2301.00001", "weird");
    x.source.fields.dataset = "Weird";
    auto o = categorize_record(x, gw, tmpl());
    CHECK(o.labels == std::vector<std::string>{"Other"});
    CHECK(o.flagged);
}

TEST_CASE("alternate taxonomy") {
    auto gw = replying(by_name);
    auto t = Taxonomy::reasoning_types();
    auto g = rec("g", "2301.00001", "gsm8k");
    g.source.fields.dataset = "GSM8K";
    CHECK(alt_categorize_record(g, t, gw, tmpl()).labels == std::vector<std::string>{"Math"});
    auto s = rec("s", "2301.00001", "lastletter");
    s.source.fields.dataset = "Last Letter";
    CHECK(alt_categorize_record(s, t, gw, tmpl()).labels == std::vector<std::string>{"Symbolic and algorithmic"});
    auto u = rec("u", "2301.00001", "weird");
    auto fb = alt_categorize_record(u, t, gw, tmpl());
    CHECK(fb.labels == std::vector<std::string>{"Other"});
    CHECK(fb.flagged);
}

TEST_CASE("prompt shows name, subset, description and every label") {
    auto t = Taxonomy::skills();
    auto p = render_category_prompt(tmpl(), t, "MMLU", "STEM", "A multitask benchmark.");
    CHECK(p.find("Dataset: MMLU") != std::string::npos);
    CHECK(p.find("Subset: STEM") != std::string::npos);
    CHECK(p.find("A multitask benchmark.") != std::string::npos);
    for (const auto& l : t.labels) CHECK(p.find(l) != std::string::npos);
}

TEST_CASE("one call per unique dataset key") {
    std::atomic<int> calls{0};
    auto gw = replying([&](const std::string& p) {
        ++calls;
        return by_name(p);
    });
    std::vector<NormalizedRecord> rs;
    for (int i = 0; i < 5; ++i) {
        auto r = rec("g" + std::to_string(i), "2301.0000" + std::to_string(i), "gsm8k", "xx", std::to_string(i));
        r.source.fields.dataset = "GSM8K";
        rs.push_back(r);
    }
    auto c = rec("c", "2301.00009", "commonsenseqa");
    c.source.fields.dataset = "CommonsenseQA";
    rs.push_back(c);
    auto out = categorize_records(rs, Taxonomy::skills(), gw, tmpl());
    CHECK(calls == 2);
    REQUIRE(out.size() == 6);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].record_id == rs[i].record_id);
    CHECK(out[0].labels == out[4].labels);
}

TEST_CASE("assignment json round trip") {
    CategoryAssignment a{"r1", {"Math", "Reasoning"}, true, "note"};
    CHECK(assignment_from_json(to_json(a)) == a);
}

TEST_CASE("trend: five records of one triple count once") {
    std::vector<NormalizedRecord> rs;
    std::vector<CategoryAssignment> as;
    for (int i = 0; i < 5; ++i) {
        rs.push_back(rec("r" + std::to_string(i), "2301.00001", "gsm8k", "xx", std::to_string(i)));
        as.push_back({rs.back().record_id, {"Reasoning"}, false, ""});
    }
    auto t = quarterly_trend(rs, as);
    REQUIRE(t.size() == 1);
    CHECK(t[0] == TrendCell{"Reasoning", "2023-Q1", 1});
}

TEST_CASE("trend: same triple in two papers counts twice") {
    std::vector<NormalizedRecord> rs{rec("a", "2301.00001", "gsm8k"), rec("b", "2302.00002", "gsm8k")};
    std::vector<CategoryAssignment> as{{"a", {"Math"}, false, ""}, {"b", {"Math"}, false, ""}};
    auto t = quarterly_trend(rs, as);
    REQUIRE(t.size() == 1);
    CHECK(t[0].count == 2);
}

TEST_CASE("trend: twelve records, three papers, two quarters") {
    const std::string p1 = "2301.00001", p2 = "2302.00002", p3 = "2305.00003";
    std::vector<std::pair<NormalizedRecord, std::vector<std::string>>> rows{
        {rec("1", p1, "gsm8k", "xx", "0"), {"Math"}},
        {rec("2", p1, "gsm8k", "xx", "4"), {"Math"}},
        {rec("3", p1, "gsm8k", "xx", "8"), {"Math"}},
        {rec("4", p1, "mmlu", "stem"), {"Knowledge", "Reasoning"}},
        {rec("5", p1, "mmlu", "humanities"), {"Knowledge"}},
        {rec("6", p2, "gsm8k"), {"Math"}},
        {rec("7", p2, "commonsenseqa", "xx", "0"), {"Reasoning"}},
        {rec("8", p2, "commonsenseqa", "xx", "5"), {"Reasoning"}},
        {rec("9", p3, "gsm8k"), {"Math"}},
        {rec("10", p3, "humaneval"), {"Coding"}},
        {rec("11", p3, "mmlu", "stem"), {"Knowledge", "Reasoning"}},
        {rec("12", p3, "flores101"), {"Multilinguality"}},
    };
    std::vector<NormalizedRecord> rs;
    std::vector<CategoryAssignment> as;
    for (const auto& [r, l] : rows) {
        rs.push_back(r);
        as.push_back({r.record_id, l, false, ""});
    }
    std::vector<TrendCell> want{
        {"Coding", "2023-Q2", 1},    {"Knowledge", "2023-Q1", 2}, {"Knowledge", "2023-Q2", 1},
        {"Math", "2023-Q1", 2},      {"Math", "2023-Q2", 1},      {"Multilinguality", "2023-Q2", 1},
        {"Reasoning", "2023-Q1", 2}, {"Reasoning", "2023-Q2", 1},
    };
    CHECK(quarterly_trend(rs, as) == want);
}

TEST_CASE("trend skips unassigned records") {
    std::vector<NormalizedRecord> rs{rec("a", "2301.00001", "gsm8k"), rec("b", "2301.00001", "mmlu")};
    std::vector<CategoryAssignment> as{{"a", {"Math"}, false, ""}};
    CHECK(quarterly_trend(rs, as).size() == 1);
}

#include "doctest.h"

#include "builders.hpp"
#include "llmeval/describe.hpp"
#include "llmeval/errors.hpp"

#include <mutex>

using namespace llmeval;

namespace {

const DescriptionTemplates& templates() {
    static const auto t = DescriptionTemplates::load();
    return t;
}

std::string full(const std::string& what) {
    return "Dataset Summary: " + what + " is a benchmark.\nTask Explanation: answer questions.\nSubset Description: xx";
}

/// Answers each prompt kind with a fixed reply and remembers which kinds were asked, in order.
struct Scripted {
    std::string knowledge, table_paper, linked_paper;
    std::vector<std::string> asked;
    std::mutex m;

    Gateway gateway() {
        GatewayConfig cfg;
        cfg.retry_limit = 0;
        return Gateway(cfg, std::make_shared<CallbackBackend>([this](const std::string& p) {
            std::lock_guard lock(m);
            if (p.rfind("Describe the dataset below", 0) == 0) {
                asked.push_back("knowledge");
                return knowledge;
            }
            if (p.find("LINKED PAPER BODY") != std::string::npos) {
                asked.push_back("linked");
                return linked_paper;
            }
            asked.push_back("table");
            return table_paper;
        }));
    }
};

PaperSource table_paper() {
    PaperSource p;
    p.arxiv_id = "2402.00001";
    p.latex = "\\section{Setup}\nWe evaluate on Foo.\n";
    p.bibliography["foo2021"] = "Foo: a dataset. arXiv:2101.00042";
    return p;
}

PaperLookup lookup() {
    return [](const std::string& id) -> std::optional<PaperSource> {
        if (id != "2101.00042") return std::nullopt;
        PaperSource p;
        p.arxiv_id = id;
        p.latex = "\\section{Intro}\nLINKED PAPER BODY: Foo is a dataset of questions.\n";
        return p;
    };
}

TemplateFields record(std::string tag = "foo2021") {
    TemplateFields f;
    f.dataset = "Foo";
    f.dataset_citation_tag = std::move(tag);
    return f;
}

}  // namespace

TEST_CASE("query joins dataset and subset") {
    CHECK(description_query("MMLU", "xx") == "MMLU");
    CHECK(description_query("MMLU", "STEM") == "MMLU - STEM");
}

TEST_CASE("full knowledge reply parses") {
    Scripted s;
    s.knowledge = full("CommonsenseQA");
    auto gw = s.gateway();
    auto r = generate_from_knowledge("CommonsenseQA", "xx", gw, templates().knowledge);
    auto* d = std::get_if<DatasetDescription>(&r);
    REQUIRE(d);
    CHECK(d->source == DescriptionSource::InternalKnowledge);
    CHECK(d->summary == "CommonsenseQA is a benchmark.");
    CHECK(d->task_explanation == "answer questions.");
    CHECK(d->subset_description.empty());
}

TEST_CASE("refusal token") {
    Scripted s;
    s.knowledge = "<UNSURE>";
    auto gw = s.gateway();
    auto r = generate_from_knowledge("Obscure", "xx", gw, templates().knowledge);
    REQUIRE(std::holds_alternative<Refusal>(r));
    CHECK(std::get<Refusal>(r).reason == "refused");
}

TEST_CASE("summary without task is a parse error treated as refusal") {
    Scripted s;
    s.knowledge = "Dataset Summary: something.";
    auto gw = s.gateway();
    auto r = generate_from_knowledge("Foo", "xx", gw, templates().knowledge);
    REQUIRE(std::holds_alternative<Refusal>(r));
    CHECK(std::get<Refusal>(r).reason == "parse-error");
}

TEST_CASE("missing dataset is a precondition failure") {
    Scripted s;
    auto gw = s.gateway();
    CHECK_THROWS_AS(generate_from_knowledge("xx", "xx", gw, templates().knowledge), PreconditionError);
}

TEST_CASE("grounded attribution follows the supplied text") {
    Scripted s;
    s.table_paper = full("Foo");
    s.linked_paper = full("Foo");
    auto gw = s.gateway();
    auto a = generate_from_source("Foo", "xx", "body", DescriptionSource::TablePaper, gw, templates().grounded);
    REQUIRE(a);
    CHECK(a->source == DescriptionSource::TablePaper);
    auto b = generate_from_source("Foo", "xx", "LINKED PAPER BODY", DescriptionSource::LinkedDatasetPaper, gw,
                                  templates().grounded);
    REQUIRE(b);
    CHECK(b->source == DescriptionSource::LinkedDatasetPaper);
    CHECK_THROWS_AS(generate_from_source("Foo", "xx", "  ", DescriptionSource::TablePaper, gw, templates().grounded),
                    PreconditionError);
}

TEST_CASE("subset needs its own section") {
    auto with = parse_description(
        "Dataset Summary: S.\nTask Explanation: T.\nSubset Description: the algebra part.", "MATH", "Algebra",
        DescriptionSource::InternalKnowledge);
    REQUIRE(with);
    CHECK(with->subset_description == "the algebra part.");
    CHECK_FALSE(parse_description("Dataset Summary: S.\nTask Explanation: T.\nSubset Description: xx", "MATH",
                                  "Algebra", DescriptionSource::InternalKnowledge));
}

TEST_CASE("latex is stripped from descriptions") {
    auto d = parse_description("Dataset Summary: \\textbf{Foo} from \\cite{x} has $n$ items.\nTask Explanation: "
                               "\\emph{classify}.",
                               "Foo", "xx", DescriptionSource::InternalKnowledge);
    REQUIRE(d);
    CHECK(d->summary.find('\\') == std::string::npos);
    CHECK(d->summary.find("Foo") != std::string::npos);
    CHECK(d->task_explanation.find("classify") != std::string::npos);
    CHECK(strip_latex("\\textbf{bold} and \\textit{it}") == "bold and it");
}

TEST_CASE("knowledge success uses one call") {
    Scripted s;
    s.knowledge = full("Foo");
    auto gw = s.gateway();
    auto r = describe(record(), table_paper(), lookup(), gw, templates());
    REQUIRE(r.description);
    CHECK(r.description->source == DescriptionSource::InternalKnowledge);
    CHECK(gw.calls() == 1);
    CHECK(r.stages == std::vector<DescriptionSource>{DescriptionSource::InternalKnowledge});
}

TEST_CASE("refusal falls back to the table paper") {
    Scripted s;
    s.knowledge = "<UNSURE>";
    s.table_paper = full("Foo");
    auto gw = s.gateway();
    auto r = describe(record(), table_paper(), lookup(), gw, templates());
    REQUIRE(r.description);
    CHECK(r.description->source == DescriptionSource::TablePaper);
    CHECK(s.asked == std::vector<std::string>{"knowledge", "table"});
}

TEST_CASE("then the linked dataset paper") {
    Scripted s;
    s.knowledge = "<UNSURE>";
    s.table_paper = "<UNSURE>";
    s.linked_paper = full("Foo");
    auto gw = s.gateway();
    auto r = describe(record(), table_paper(), lookup(), gw, templates());
    REQUIRE(r.description);
    CHECK(r.description->source == DescriptionSource::LinkedDatasetPaper);
    CHECK(s.asked == std::vector<std::string>{"knowledge", "table", "linked"});
}

TEST_CASE("every stage failing leaves the description invalid") {
    Scripted s;
    s.knowledge = "garbage";
    s.table_paper = "still garbage";
    s.linked_paper = "Dataset Summary: only this";
    auto gw = s.gateway();
    auto r = describe(record(), table_paper(), lookup(), gw, templates());
    CHECK(r.invalid());
    CHECK(r.stages.size() == 3);
}

TEST_CASE("no citation tag stops after the table paper") {
    Scripted s;
    s.knowledge = "<UNSURE>";
    s.table_paper = "<UNSURE>";
    auto gw = s.gateway();
    auto r = describe(record("xx"), table_paper(), lookup(), gw, templates());
    CHECK(r.invalid());
    CHECK(s.asked == std::vector<std::string>{"knowledge", "table"});
}

TEST_CASE("unresolvable tag stops after the table paper") {
    Scripted s;
    s.knowledge = "<UNSURE>";
    s.table_paper = "<UNSURE>";
    auto gw = s.gateway();
    auto r = describe(record("unknown2020"), table_paper(), lookup(), gw, templates());
    CHECK(r.invalid());
    CHECK(s.asked.size() == 2);
}

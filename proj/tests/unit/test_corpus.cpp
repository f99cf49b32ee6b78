#include "doctest.h"

#include "fixture_llm.hpp"
#include "llmeval/corpus.hpp"
#include "llmeval/errors.hpp"
#include "llmeval/text_util.hpp"

#include <filesystem>
#include <fstream>

using namespace llmeval;
namespace fs = std::filesystem;

namespace {

const CorpusFilter kWindow{{2023, 1}, {2024, 12}, {"cs.AI", "cs.CL", "cs.CV", "cs.LG"}};

fs::path data(const std::string& rel) { return fs::path(fixture::data_dir()) / rel; }

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("llmeval_corpus_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& s) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << s;
}

std::string reason_of(const ScanResult& r, const std::string& entry) {
    for (const auto& s : r.skips)
        if (s.entry.rfind(entry, 0) == 0) return s.reason;
    return "";
}

}  // namespace

TEST_CASE("quarter labels") {
    CHECK(arxiv_id_to_quarter("2301.08721") == "2023-Q1");
    CHECK(arxiv_id_to_quarter("2408.02718") == "2024-Q3");
    CHECK(arxiv_id_to_quarter("2412.00001") == "2024-Q4");
    CHECK_THROWS_AS(arxiv_id_to_quarter("2304.1234"), MalformedId);
    CHECK_THROWS_AS(arxiv_id_to_quarter("2313.00001"), MalformedId);
    CHECK_THROWS_AS(arxiv_id_to_quarter("hep-th/9901001"), MalformedId);
    CHECK_THROWS_AS(arxiv_id_to_quarter(""), MalformedId);
}

TEST_CASE("month from id and from yymm") {
    CHECK(arxiv_id_to_month("2212.00001") == YearMonth{2022, 12});
    CHECK(YearMonth::from_yymm("2301") == YearMonth{2023, 1});
    CHECK(YearMonth{2024, 3}.to_string() == "2024-03");
    CHECK_THROWS_AS(YearMonth::from_yymm("23"), MalformedId);
    CHECK(is_valid_arxiv_id("2301.00001"));
    CHECK_FALSE(is_valid_arxiv_id("2300.00001"));
    CHECK_FALSE(is_valid_arxiv_id("2301.0001x"));
}

TEST_CASE("filter validation") {
    CHECK_NOTHROW(kWindow.validate());
    CorpusFilter backwards{{2024, 1}, {2023, 1}, {"cs.CL"}};
    CHECK_THROWS_AS(backwards.validate(), ConfigError);
    CorpusFilter none{{2023, 1}, {2024, 1}, {}};
    CHECK_THROWS_AS(none.validate(), ConfigError);
}

TEST_CASE("admission needs the window and any one category") {
    PaperSource p;
    p.arxiv_id = "2301.00001";
    p.published = {2023, 1};
    p.categories = {"stat.ML", "cs.LG"};
    CHECK(kWindow.admits(p));
    p.categories = {"stat.ML"};
    CHECK_FALSE(kWindow.admits(p));
    p.categories = {"cs.CL"};
    p.published = {2022, 12};
    CHECK_FALSE(kWindow.admits(p));
    p.published = {2024, 12};
    CHECK(kWindow.admits(p));
}

TEST_CASE("three admissible papers give three sources and no skips") {
    auto root = scratch("three");
    std::string manifest;
    for (std::string id : {"2301.00001", "2305.00002", "2412.00003"}) {
        write(root / id / "main.tex", "\\documentclass{article}\n\\begin{document}\nx\n\\end{document}\n");
        manifest += id + "\tcs.CL\tT\n";
    }
    write(root / "manifest.tsv", manifest);
    auto r = scan_corpus(root, kWindow);
    CHECK(r.sources.size() == 3);
    CHECK(r.skips.empty());
}

TEST_CASE("five archives, one without latex") {
    auto r = scan_corpus(data("scan5"), kWindow);
    REQUIRE(r.sources.size() == 4);
    REQUIRE(r.skips.size() == 1);
    CHECK(r.skips[0].entry == "2305.00005.tar.gz");
    CHECK(r.skips[0].reason == "no-latex");
    CHECK(r.sources[0].arxiv_id == "2301.00001");
    CHECK(r.sources[1].title == "Second");
    CHECK(r.sources[2].title == "Third");
    CHECK(r.sources[3].title == "Fourth");
}

TEST_CASE("every skip reason is reported per entry") {
    auto r = scan_corpus(data("scan_skips"), kWindow, std::nullopt, 3);
    REQUIRE(r.sources.size() == 1);
    CHECK(r.sources[0].arxiv_id == "2301.00010");
    CHECK(r.sources[0].categories == std::set<std::string>{"cs.LG"});
    CHECK(r.sources[0].published == YearMonth{2023, 1});
    CHECK(reason_of(r, "2212.00001") == "date-out-of-window");
    CHECK(reason_of(r, "2302.00011") == "category-mismatch");
    CHECK(reason_of(r, "2302.00012") == "no-metadata");
    CHECK(reason_of(r, "2303.00013").rfind("corrupt-archive", 0) == 0);
    CHECK(reason_of(r, "2303.00014") == "no-main-file");
    CHECK(reason_of(r, "not-an-id") == "malformed-id");
    CHECK(r.sources.size() + r.skips.size() == 7);
}

TEST_CASE("scan results are sorted and independent of worker count") {
    auto a = scan_corpus(fixture::corpus_dir(), kWindow, std::nullopt, 1);
    auto b = scan_corpus(fixture::corpus_dir(), kWindow, std::nullopt, 8);
    CHECK(a.sources == b.sources);
    CHECK(a.skips == b.skips);
    for (std::size_t i = 1; i < a.sources.size(); ++i) CHECK(a.sources[i - 1].arxiv_id < a.sources[i].arxiv_id);
    for (const auto& s : a.sources) CHECK(kWindow.admits(s));
    std::size_t entries = 0;
    for (const auto& de : fs::directory_iterator(fixture::corpus_dir()))
        if (de.path().filename() != "manifest.tsv") ++entries;
    CHECK(a.sources.size() + a.skips.size() == entries);
}

TEST_CASE("explicit manifest overrides the sidecar") {
    Manifest m;
    m["2301.00001"] = {{"cs.CL"}, "only"};
    auto r = scan_corpus(data("scan5"), kWindow, m);
    CHECK(r.sources.size() == 1);
    CHECK(reason_of(r, "2302.00002") == "no-metadata");
}

TEST_CASE("unreadable root is an io error") {
    CHECK_THROWS_AS(scan_corpus("/nonexistent/corpus/root", kWindow), IoError);
}

TEST_CASE("manifest parsing") {
    auto dir = scratch("manifest");
    write(dir / "m.tsv", "2301.00001\tcs.CL, cs.AI\tA title\n\n2302.00002\tcs.LG\t\n");
    auto m = load_manifest(dir / "m.tsv");
    REQUIRE(m.size() == 2);
    CHECK(m["2301.00001"].categories == std::set<std::string>{"cs.AI", "cs.CL"});
    CHECK(m["2301.00001"].title == "A title");
    CHECK(m["2302.00002"].title.empty());
}

TEST_CASE("flatten: single main file is unchanged") {
    PaperFiles f;
    std::string main = "\\documentclass{article}\n\\begin{document}\nHello.\n\\end{document}\n";
    f.files["main.tex"] = main;
    CHECK(flatten_latex(f) == main);
}

TEST_CASE("flatten: input is spliced in place") {
    PaperFiles f;
    f.files["main.tex"] = "\\documentclass{article}\nBefore.\n\\input{tables}\nAfter.\n";
    f.files["tables.tex"] = "TABLE BODY\n";
    CHECK(flatten_latex(f) == "\\documentclass{article}\nBefore.\nTABLE BODY\n\nAfter.\n");
}

TEST_CASE("flatten: include, subdirectories and missing targets") {
    PaperFiles f;
    f.files["paper.tex"] = "\\documentclass{article}\n\\include{sec/intro}\n\\input{missing}\n";
    f.files["sec/intro.tex"] = "Intro text.";
    auto out = flatten_latex(f);
    CHECK(out.find("Intro text.") != std::string::npos);
    CHECK(out.find("\\input{missing}") != std::string::npos);
}

TEST_CASE("flatten: inlining is one level deep") {
    PaperFiles f;
    f.files["main.tex"] = "\\documentclass{article}\n\\input{a}\n";
    f.files["a.tex"] = "A\n\\input{b}\n";
    f.files["b.tex"] = "B\n";
    auto out = flatten_latex(f);
    CHECK(out.find("\\input{b}") != std::string::npos);
    CHECK(out.find("B\n") == std::string::npos);
}

TEST_CASE("flatten: no documentclass is an error") {
    PaperFiles f;
    f.files["a.tex"] = "\\section{A}";
    f.files["b.tex"] = "\\section{B}";
    CHECK_THROWS_AS(flatten_latex(f), NoMainFile);
}

TEST_CASE("flatten: tie goes to the largest candidate") {
    PaperFiles f;
    f.files["short.tex"] = "\\documentclass{article}\nS\n";
    f.files["long.tex"] = "\\documentclass{article}\nLonger body text here.\n";
    CHECK(flatten_latex(f).find("Longer") != std::string::npos);
}

TEST_CASE("bibliography from bibitem blocks") {
    auto bib = extract_bibliography(
        "\\begin{thebibliography}{9}\n\\bibitem{patel2021nlp} A. Patel. Are NLP models really able to solve "
        "simple math word problems? 2021.\n\\end{thebibliography}\n");
    REQUIRE(bib.size() == 1);
    CHECK(bib.count("patel2021nlp") == 1);
    CHECK(bib["patel2021nlp"].find("Patel") != std::string::npos);
}

TEST_CASE("bibliography: optional label and absence") {
    auto bib = extract_bibliography("\\bibitem[Wei et al.(2022)]{wei2022} J. Wei. Chain of thought.\n");
    CHECK(bib.count("wei2022") == 1);
    CHECK(extract_bibliography("\\section{Intro} no references").empty());
}

TEST_CASE("bibliography: twelve bib entries") {
    auto text = text::read_file(data("refs12.bib"));
    auto bib = extract_bibliography("", {text});
    CHECK(bib.size() == 12);
    CHECK(bib.count("key00") == 1);
    CHECK(bib.count("key11") == 1);
    CHECK(bib.count("comment") == 0);
}

TEST_CASE("title extraction folds newlines") {
    CHECK(extract_title("\\title{A Study\nof Things}") == "A Study of Things");
    CHECK(extract_title("\\title[short]{Long {Nested} Title}") == "Long {Nested} Title");
    CHECK(extract_title("no title").empty());
}

TEST_CASE("archive loading") {
    auto files = load_entry(data("scan5/2303.00003.tgz"));
    CHECK(files.files.count("src/main.tex") == 1);
    CHECK(files.has_latex());
    CHECK_FALSE(load_entry(data("scan5/2305.00005.tar.gz")).has_latex());
    CHECK_THROWS_AS(load_entry(data("scan_skips/2303.00013.tar.gz")), CorruptArchive);
}

#include "llmeval/describe.hpp"

#include "llmeval/text_util.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace llmeval {

DescriptionTemplates DescriptionTemplates::load(const std::filesystem::path& dir) {
    return {load_prompt("description_knowledge", dir), load_prompt("description_grounded", dir)};
}

std::string description_query(std::string_view dataset, std::string_view subset) {
    if (is_missing(subset) || text::trim(subset).empty()) return std::string(dataset);
    return std::string(dataset) + " - " + std::string(subset);
}

std::string strip_latex(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\\') {
            if (i + 1 < s.size() && !std::isalpha(static_cast<unsigned char>(s[i + 1]))) {
                // escaped symbol such as \% or \&
                out += s[i + 1];
                ++i;
                continue;
            }
            std::size_t j = i + 1;
            while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
            std::string_view cmd = s.substr(i + 1, j - i - 1);
            if (cmd == "rightarrow" || cmd == "to") out += "->";
            else if (cmd == "leftarrow") out += "<-";
            i = j - 1;
            continue;
        }
        if (c == '{' || c == '}' || c == '$') continue;
        out += c;
    }
    std::string folded;
    for (char c : out)
        if (!(c == ' ' && !folded.empty() && folded.back() == ' ')) folded += c;
    return text::trim(folded);
}

namespace {

constexpr std::array<std::string_view, 3> kHeadings = {"dataset summary", "task explanation", "subset description"};

/// Offset just past a heading line marker ("Dataset Summary:", "**Task Explanation**"),
/// searching from `from`. Returns {start of heading, start of body}.
std::optional<std::pair<std::size_t, std::size_t>> find_heading(const std::string& lower, std::string_view heading,
                                                                std::size_t from = 0) {
    auto pos = lower.find(heading, from);
    if (pos == std::string::npos) return std::nullopt;
    std::size_t body = pos + heading.size();
    while (body < lower.size() && (lower[body] == '*' || lower[body] == '}' || lower[body] == ':' ||
                                   lower[body] == ' ' || lower[body] == '\t'))
        ++body;
    std::size_t start = pos;
    while (start > 0 && (lower[start - 1] == '*' || lower[start - 1] == '#' || lower[start - 1] == ' ' ||
                         lower[start - 1] == '{'))
        --start;
    if (start >= 7 && lower.compare(start - 7, 7, "\\textbf") == 0) start -= 7;
    return std::make_pair(start, body);
}

}  // namespace

std::optional<DatasetDescription> parse_description(std::string_view reply, std::string_view dataset,
                                                    std::string_view subset, DescriptionSource source) {
    std::string raw(reply);
    std::string lower = text::to_lower(raw);
    if (lower.find(text::to_lower(kRefusalToken)) != std::string::npos) return std::nullopt;

    std::array<std::optional<std::pair<std::size_t, std::size_t>>, 3> found;
    for (std::size_t h = 0; h < kHeadings.size(); ++h) found[h] = find_heading(lower, kHeadings[h]);

    auto section = [&](std::size_t h) -> std::string {
        if (!found[h]) return "";
        std::size_t end = raw.size();
        for (std::size_t other = 0; other < kHeadings.size(); ++other)
            if (other != h && found[other] && found[other]->first > found[h]->second)
                end = std::min(end, found[other]->first);
        return strip_latex(std::string_view(raw).substr(found[h]->second, end - found[h]->second));
    };

    DatasetDescription d;
    d.dataset = std::string(dataset);
    d.subset = std::string(subset);
    d.summary = section(0);
    d.task_explanation = section(1);
    d.source = source;
    if (d.summary.empty() || d.task_explanation.empty()) return std::nullopt;
    if (!is_missing(subset)) {
        d.subset_description = section(2);
        if (d.subset_description.empty() || is_missing(d.subset_description)) return std::nullopt;
    }
    return d;
}

std::variant<DatasetDescription, Refusal> generate_from_knowledge(const std::string& dataset,
                                                                  const std::string& subset, Gateway& gateway,
                                                                  const PromptTemplate& tmpl) {
    if (is_missing(dataset)) throw PreconditionError("dataset name is missing");
    auto reply = gateway.complete(tmpl.render({{"query", description_query(dataset, subset)}}));
    if (reply.find(kRefusalToken) != std::string::npos) return Refusal{"refused"};
    auto parsed = parse_description(reply, dataset, subset, DescriptionSource::InternalKnowledge);
    if (!parsed) return Refusal{"parse-error"};
    return *parsed;
}

std::optional<DatasetDescription> generate_from_source(const std::string& dataset, const std::string& subset,
                                                       const std::string& source_text, DescriptionSource which,
                                                       Gateway& gateway, const PromptTemplate& tmpl) {
    if (text::trim(source_text).empty()) throw PreconditionError("grounding text is empty");
    auto reply = gateway.complete(
        tmpl.render({{"query", description_query(dataset, subset)}, {"source_text", source_text}}));
    return parse_description(reply, dataset, subset, which);
}

DescribeResult describe(const TemplateFields& record, const PaperSource& table_source, const PaperLookup& resolver,
                        Gateway& gateway, const DescriptionTemplates& templates, const ContextOptions& grounding) {
    if (is_missing(record.dataset)) throw PreconditionError("record has no dataset name");
    DescribeResult result;

    result.stages.push_back(DescriptionSource::InternalKnowledge);
    auto known = generate_from_knowledge(record.dataset, record.subset, gateway, templates.knowledge);
    if (auto* d = std::get_if<DatasetDescription>(&known)) {
        result.description = std::move(*d);
        return result;
    }
    result.note = "knowledge:" + std::get<Refusal>(known).reason;

    auto table_text = build_context(table_source, grounding).text;
    if (!text::trim(table_text).empty()) {
        result.stages.push_back(DescriptionSource::TablePaper);
        result.description = generate_from_source(record.dataset, record.subset, table_text,
                                                   DescriptionSource::TablePaper, gateway, templates.grounded);
        if (result.description) return result;
        result.note += ";table_paper:failed";
    }

    if (is_missing(record.dataset_citation_tag) || !resolver) {
        result.note += ";linked_paper:no-tag";
        return result;
    }
    for (const auto& tag : text::split(record.dataset_citation_tag, ',')) {
        auto trimmed = text::trim(tag);
        if (trimmed.empty()) continue;
        auto id = resolve_citation(trimmed, table_source);
        if (!id) continue;
        auto linked = resolver(*id);
        if (!linked) continue;
        auto linked_text = build_context(*linked, grounding).text;
        if (text::trim(linked_text).empty()) continue;
        result.stages.push_back(DescriptionSource::LinkedDatasetPaper);
        result.description = generate_from_source(record.dataset, record.subset, linked_text,
                                                   DescriptionSource::LinkedDatasetPaper, gateway, templates.grounded);
        if (!result.description) result.note += ";linked_paper:failed";
        return result;
    }
    result.note += ";linked_paper:unresolved";
    return result;
}

}  // namespace llmeval

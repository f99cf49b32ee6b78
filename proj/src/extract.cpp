#include "llmeval/extract.hpp"

#include "llmeval/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>

namespace llmeval {

TargetSpec TargetSpec::for_model(TargetModel m) {
    switch (m) {
        case TargetModel::Gpt4:
            return {m,
                    {"gpt-4o", "gpt4o", "gpt-4-o", "gpt4-o", "gpt-4v", "gpt-4-v", "gpt4-v", "gpt4v",
                     "vision", "deplot", "+", "o1", "mini"},
                    {"gpt-4-0314", "gpt-4-0613", "gpt-4-0623", "gpt-4-0828", "gpt-4-32k"}};
        case TargetModel::Gpt4o:
            return {m,
                    {"mini", "o1", "turbo", "gpt-4v", "gpt4-v", "gpt-4-v", "realtime", "audio", "+"},
                    {"gpt-4o-2024-05-13", "gpt-4o-2024-08-06", "gpt-4o-2024-11-20", "chatgpt-4o-latest"}};
        case TargetModel::Claude3Opus:
            return {m,
                    {"sonnet", "haiku", "claude-2", "claude2", "claude 2", "claude-3.5", "claude 3.5", "claude3.5",
                     "claude-3-5", "instant", "+"},
                    {"claude-3-opus-20240229", "claude-3-opus", "claude 3 opus"}};
        case TargetModel::Gemini10Pro:
            return {m,
                    {"1.5", "ultra", "flash", "nano", "2.0", "exp", "+"},
                    {"gemini-1.0-pro-001", "gemini-1.0-pro-002", "gemini-pro", "gemini 1.0 pro"}};
    }
    return {};
}

void TargetSpec::validate() const {
    std::set<std::string> ex(variant_exclusions.begin(), variant_exclusions.end());
    for (const auto& inc : version_inclusions)
        if (ex.count(inc)) throw ConfigError("pattern '" + inc + "' is both excluded and included");
}

// ---------------------------------------------------------------------------

namespace {

/// Reads a quoted string starting at s[i] (the quote). Returns the decoded text and
/// advances i past the closing quote; nullopt when unterminated.
std::optional<std::string> read_quoted(std::string_view s, std::size_t& i) {
    char q = s[i];
    std::string out;
    for (std::size_t j = i + 1; j < s.size(); ++j) {
        char c = s[j];
        if (c == '\\' && j + 1 < s.size()) {
            char n = s[j + 1];
            if (n == '"' || n == '\'' || n == '\\' || n == '/') {
                out += n;
                ++j;
                continue;
            }
            out += c;  // keep LaTeX commands such as \textbf verbatim
            continue;
        }
        if (c == q) {
            i = j + 1;
            return out;
        }
        out += c;
    }
    return std::nullopt;
}

void skip_space(std::string_view s, std::size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

/// Closing brace of the object opened at s[open], skipping quoted text.
std::size_t object_end(std::string_view s, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (c == '"' || c == '\'') {
            // apostrophes inside bare words ("model's") are not string delimiters
            bool opens_string = c == '"' || i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1]));
            if (opens_string) {
                std::size_t j = i;
                if (read_quoted(s, j)) {
                    i = j - 1;
                    continue;
                }
                return std::string_view::npos;
            }
        }
        if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

/// Parses the inside of `{...}`; nullopt when the body is not key/value pairs.
std::optional<std::pair<TemplateFields, int>> parse_object_body(std::string_view body) {
    TemplateFields f;
    int known = 0;
    std::size_t i = 0;
    for (;;) {
        skip_space(body, i);
        while (i < body.size() && body[i] == ',') {
            ++i;
            skip_space(body, i);
        }
        if (i >= body.size()) break;

        std::string key;
        if (body[i] == '"' || body[i] == '\'') {
            auto k = read_quoted(body, i);
            if (!k) return std::nullopt;
            key = *k;
        } else {
            std::size_t start = i;
            while (i < body.size() && (std::isalnum(static_cast<unsigned char>(body[i])) || body[i] == '_')) ++i;
            if (i == start) return std::nullopt;
            key = std::string(body.substr(start, i - start));
        }
        skip_space(body, i);
        if (i >= body.size() || body[i] != ':') return std::nullopt;
        ++i;
        skip_space(body, i);
        if (i >= body.size()) return std::nullopt;

        std::string value;
        if (body[i] == '"' || body[i] == '\'') {
            auto v = read_quoted(body, i);
            if (!v) return std::nullopt;
            value = *v;
        } else if (body[i] == '{' || body[i] == '[') {
            return std::nullopt;
        } else {
            std::size_t start = i;
            while (i < body.size() && body[i] != ',') ++i;
            value = text::trim(body.substr(start, i - start));
            if (value == "null" || value.empty()) value = std::string(kMissing);
        }

        key = text::trim(key);
        if (std::find(kTemplateKeys.begin(), kTemplateKeys.end(), key) != kTemplateKeys.end()) {
            auto trimmed = text::trim(value);
            field_ref(f, key) = trimmed.empty() ? std::string(kMissing) : trimmed;
            ++known;
        }
    }
    return std::make_pair(std::move(f), known);
}

std::optional<TemplateParse> parse_as_json(std::string_view text) {
    auto t = text::trim(text);
    if (t.empty() || (t.front() != '[' && t.front() != '{')) return std::nullopt;
    json doc;
    try {
        doc = json::parse(t);
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (doc.is_object()) doc = json::array({doc});
    if (!doc.is_array()) return std::nullopt;
    TemplateParse out;
    for (const auto& obj : doc) {
        if (!obj.is_object()) return std::nullopt;
        TemplateFields f;
        int known = 0;
        for (auto key : kTemplateKeys) {
            if (!obj.contains(key)) continue;
            const auto& v = obj[std::string(key)];
            std::string s = v.is_string() ? v.get<std::string>() : v.is_null() ? std::string(kMissing) : v.dump();
            s = text::trim(s);
            field_ref(f, key) = s.empty() ? std::string(kMissing) : s;
            ++known;
        }
        if (known == 0) return std::nullopt;
        out.records.push_back(std::move(f));
    }
    return out;
}

}  // namespace

TemplateParse parse_record_template(std::string_view text) {
    TemplateParse out;
    auto lines = text::split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        std::string_view line = lines[li];
        std::size_t pos = 0;
        bool opened = false;
        std::size_t found = 0;
        std::string problem;
        while ((pos = line.find('{', pos)) != std::string_view::npos) {
            opened = true;
            auto close = object_end(line, pos);
            if (close == std::string_view::npos) {
                problem = "unterminated object";
                break;
            }
            auto parsed = parse_object_body(line.substr(pos + 1, close - pos - 1));
            if (parsed && parsed->second > 0) {
                out.records.push_back(std::move(parsed->first));
                ++found;
            } else if (problem.empty()) {
                problem = parsed ? "object has no template keys" : "object body is not key/value pairs";
            }
            pos = close + 1;
        }
        if (opened && found == 0)
            out.errors.push_back({li + 1, std::string(line), problem.empty() ? "no record" : problem});
    }
    // objects pretty-printed across several lines
    if (out.records.empty() && !out.errors.empty())
        if (auto whole = parse_as_json(text)) return *whole;
    return out;
}

std::string format_record_line(const TemplateFields& fields) {
    std::string out = "{";
    for (std::size_t i = 0; i < kTemplateKeys.size(); ++i) {
        if (i) out += ", ";
        out += json(std::string(kTemplateKeys[i])).dump();
        out += ": ";
        out += json(field_ref(fields, kTemplateKeys[i])).dump(-1, ' ', false, json::error_handler_t::replace);
    }
    out += "}";
    return out;
}

// ---------------------------------------------------------------------------

std::optional<ParsedValue> strip_value_markup(std::string_view raw) {
    std::string s(raw);
    // formatting commands whose argument is the cell content
    for (std::string_view cmd : {"\\textbf", "\\textit", "\\emph", "\\underline", "\\mathbf", "\\mathit",
                                 "\\textrm", "\\textnormal", "\\mathrm", "\\uline", "\\textsc"})
        text::replace_all(s, cmd, "");
    for (std::string_view cmd : {"\\bfseries", "\\itshape", "\\boldmath", "\\bf", "\\it"}) text::replace_all(s, cmd, "");
    static const std::regex color_re(R"(\\(textcolor|color|cellcolor|colorbox)\s*(\[[^\]]*\])?\s*\{[^}]*\})");
    s = std::regex_replace(s, color_re, "");

    // "55.7 ± 0.3" keeps the mean
    for (std::string_view pm : {"±", "\\pm", "+/-", "+-"}) {
        auto p = s.find(pm);
        if (p != std::string::npos) s.erase(p);
    }
    std::string cleaned;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\\' && i + 1 < s.size() && s[i + 1] == '%') {
            ++i;
            continue;
        }
        if (c == '{' || c == '}' || c == '$' || c == '%' || c == '\\' || c == ',') continue;
        cleaned += c;
    }
    cleaned = text::trim(cleaned);

    std::size_t i = 0;
    while (i < cleaned.size() && !(std::isdigit(static_cast<unsigned char>(cleaned[i])) || cleaned[i] == '-' ||
                                   cleaned[i] == '+' || cleaned[i] == '.'))
        ++i;
    if (i != 0 && std::any_of(cleaned.begin(), cleaned.begin() + static_cast<std::ptrdiff_t>(i),
                              [](char c) { return std::isalpha(static_cast<unsigned char>(c)); }))
        return std::nullopt;  // leading words: not a value cell
    std::size_t start = i;
    if (i < cleaned.size() && (cleaned[i] == '-' || cleaned[i] == '+')) ++i;
    bool digits = false, dot = false;
    while (i < cleaned.size()) {
        char c = cleaned[i];
        if (std::isdigit(static_cast<unsigned char>(c))) digits = true;
        else if (c == '.' && !dot) dot = true;
        else break;
        ++i;
    }
    if (!digits) return std::nullopt;
    double v;
    try {
        v = std::stod(cleaned.substr(start, i - start));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (!std::isfinite(v)) return std::nullopt;
    ParsedValue out{v, false};
    auto rest = std::string_view(cleaned).substr(i);
    out.multi_number = std::any_of(rest.begin(), rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    return out;
}

// ---------------------------------------------------------------------------

std::string render_extraction_prompt(const PromptTemplate& tmpl, const TableCandidate& candidate, TargetModel target) {
    return tmpl.render({{"target_model", std::string(prompt_name(target))}, {"table_latex", candidate.latex}});
}

ExtractionOutcome interpret_extraction_reply(std::string_view reply, const TableCandidate& candidate,
                                             TargetModel target) {
    ExtractionOutcome out;
    auto parsed = parse_record_template(reply);
    if (parsed.records.empty() && reply.find(kFailedMarker) != std::string_view::npos) {
        out.no_target_model = true;
        return out;
    }
    out.errors = std::move(parsed.errors);
    for (auto& f : parsed.records) {
        ExtractionRecord r;
        r.paper_id = candidate.paper_id;
        r.table_index = candidate.table_index;
        r.target = target;
        r.fields = std::move(f);
        out.records.push_back(std::move(r));
    }
    if (out.records.empty() && out.errors.empty()) out.no_target_model = true;
    return out;
}

ExtractionOutcome extract_records(const TableCandidate& candidate, TargetModel target, Gateway& gateway,
                                  const PromptTemplate& tmpl) {
    return interpret_extraction_reply(gateway.complete(render_extraction_prompt(tmpl, candidate, target)),
                                      candidate, target);
}

std::string render_augmentation_prompt(const PromptTemplate& tmpl, const std::vector<ExtractionRecord>& records,
                                       const TableCandidate& candidate, const ContextText& context) {
    std::string lines;
    for (const auto& r : records) {
        if (!lines.empty()) lines += '\n';
        lines += format_record_line(r.fields);
    }
    return tmpl.render({{"records", lines}, {"table_latex", candidate.latex}, {"context", context.text}});
}

AugmentOutcome apply_augmentation_reply(const std::vector<ExtractionRecord>& records, std::string_view reply) {
    AugmentOutcome out;
    auto parsed = parse_record_template(reply);
    out.errors = std::move(parsed.errors);
    out.records = records;
    for (auto& r : out.records)
        if (!r.original_extracted) r.original_extracted = r.fields;

    if (parsed.records.size() != records.size()) {
        out.count_mismatch = true;
        for (auto& r : out.records) r.flags.push_back("augment-count-mismatch");
        return out;
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = out.records[i];
        const auto& proposed = parsed.records[i];
        for (auto key : kTemplateKeys) {
            const auto& before = field_ref(r.fields, key);
            const auto& after = field_ref(proposed, key);
            if (!is_missing(before) && is_missing(after)) {
                out.regressions.push_back(std::to_string(i) + ":" + std::string(key));
                r.flags.push_back("augment-regression:" + std::string(key));
                continue;
            }
            field_ref(r.fields, key) = after;
        }
    }
    return out;
}

AugmentOutcome augment_records(const std::vector<ExtractionRecord>& records, const TableCandidate& candidate,
                               const ContextText& context, Gateway& gateway, const PromptTemplate& tmpl) {
    if (records.empty()) throw PreconditionError("augmentation needs at least one record");
    return apply_augmentation_reply(records, gateway.complete(render_augmentation_prompt(tmpl, records, candidate, context)));
}

}  // namespace llmeval

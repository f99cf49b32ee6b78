#include "llmeval/latex.hpp"

#include "llmeval/errors.hpp"
#include "llmeval/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace llmeval {

namespace {

const std::set<std::string, std::less<>> kTableEnvs = {"table", "table*", "sidewaystable"};

/// Position of the first unescaped '%' in `line`, or npos.
std::size_t comment_start(std::string_view line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\') {
            ++i;
            continue;
        }
        if (line[i] == '%') return i;
    }
    return std::string_view::npos;
}

/// Same length as `latex`, with every commented character replaced by a space.
std::string mask_comments(std::string_view latex) {
    std::string masked(latex);
    std::size_t line_start = 0;
    while (line_start < masked.size()) {
        auto nl = masked.find('\n', line_start);
        auto line_end = nl == std::string::npos ? masked.size() : nl;
        auto pct = comment_start(std::string_view(masked).substr(line_start, line_end - line_start));
        if (pct != std::string_view::npos)
            std::fill(masked.begin() + static_cast<std::ptrdiff_t>(line_start + pct),
                      masked.begin() + static_cast<std::ptrdiff_t>(line_end), ' ');
        line_start = line_end + 1;
    }
    return masked;
}

/// Reads `{name}` right after `\begin` / `\end`; returns name and the index past '}'.
std::optional<std::pair<std::string, std::size_t>> env_name_at(std::string_view s, std::size_t after_cmd) {
    std::size_t i = after_cmd;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size() || s[i] != '{') return std::nullopt;
    auto close = s.find('}', i);
    if (close == std::string_view::npos) return std::nullopt;
    return std::make_pair(text::trim(s.substr(i + 1, close - i - 1)), close + 1);
}

std::string lower_letters(std::string_view s) {
    std::string out;
    for (char c : s)
        if (std::isalpha(static_cast<unsigned char>(c)) || c == ' ')
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return text::trim(out);
}

bool is_dropped_section(std::string_view title) {
    auto t = lower_letters(title);
    return t.find("acknowledg") != std::string::npos || t.find("checklist") != std::string::npos ||
           t == "references" || t == "bibliography" || t == "funding";
}

/// Removes `\begin{env}...\end{env}` blocks for each env in `envs`.
std::string remove_environments(std::string s, std::initializer_list<std::string_view> envs) {
    for (auto env : envs) {
        std::string open = "\\begin{" + std::string(env) + "}";
        std::string close = "\\end{" + std::string(env) + "}";
        std::size_t pos;
        while ((pos = s.find(open)) != std::string::npos) {
            auto end = s.find(close, pos);
            if (end == std::string::npos) {
                s.erase(pos);
                break;
            }
            s.erase(pos, end + close.size() - pos);
        }
    }
    return s;
}

/// Removes `\cmd[opt]{arg}` occurrences (optional argument allowed).
std::string remove_command(std::string s, std::string_view cmd) {
    std::string needle = "\\" + std::string(cmd);
    std::size_t pos = 0;
    while ((pos = s.find(needle, pos)) != std::string::npos) {
        std::size_t i = pos + needle.size();
        if (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) {
            pos = i;
            continue;
        }
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i < s.size() && s[i] == '[') {
            auto close = s.find(']', i);
            if (close == std::string::npos) break;
            i = close + 1;
        }
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i < s.size() && s[i] == '{') {
            auto close = text::match_brace(s, i);
            if (close == std::string::npos) break;
            i = close + 1;
        }
        s.erase(pos, i - pos);
    }
    return s;
}

/// Drops every \section whose title names boilerplate, up to the next \section,
/// \appendix or \end{document}.
std::string drop_sections(const std::string& s) {
    static const std::regex section_re(R"(\\section\*?\s*\{)");
    std::string out;
    std::size_t copied = 0;
    auto next_boundary = [&](std::size_t from) {
        std::size_t best = s.size();
        std::smatch m;
        auto begin = s.cbegin() + static_cast<std::ptrdiff_t>(from);
        if (std::regex_search(begin, s.cend(), m, section_re))
            best = std::min(best, from + static_cast<std::size_t>(m.position(0)));
        for (std::string_view stop : {"\\appendix", "\\end{document}"}) {
            auto p = s.find(stop, from);
            if (p != std::string::npos) best = std::min(best, p);
        }
        return best;
    };

    std::smatch m;
    std::size_t search_from = 0;
    while (search_from < s.size()) {
        auto begin = s.cbegin() + static_cast<std::ptrdiff_t>(search_from);
        if (!std::regex_search(begin, s.cend(), m, section_re)) break;
        std::size_t at = search_from + static_cast<std::size_t>(m.position(0));
        std::size_t brace = at + static_cast<std::size_t>(m.length(0)) - 1;
        auto close = text::match_brace(s, brace);
        if (close == std::string::npos) break;
        std::string title = s.substr(brace + 1, close - brace - 1);
        if (is_dropped_section(title)) {
            out.append(s, copied, at - copied);
            std::size_t end = next_boundary(close + 1);
            copied = end;
            search_from = end;
        } else {
            search_from = close + 1;
        }
    }
    out.append(s, copied);
    return out;
}

std::string collapse_blank_lines(const std::string& s) {
    std::string out;
    int blank_run = 0;
    for (const auto& line : text::split_lines(s)) {
        bool blank = text::trim(line).empty();
        blank_run = blank ? blank_run + 1 : 0;
        if (blank_run > 1) continue;
        out += blank ? "" : line;
        out += '\n';
    }
    return out;
}

}  // namespace

std::string strip_comments(std::string_view latex) {
    std::string out;
    out.reserve(latex.size());
    for (const auto& line : text::split_lines(latex)) {
        auto pct = comment_start(line);
        if (pct == std::string::npos) {
            out += line;
            out += '\n';
            continue;
        }
        std::string kept = line.substr(0, pct);
        if (text::trim(kept).empty()) continue;  // whole-line comment
        out += kept;
        out += '\n';
    }
    return out;
}

std::string extract_caption(std::string_view table_latex) {
    std::string masked = mask_comments(table_latex);
    std::size_t pos = 0;
    while ((pos = masked.find("\\caption", pos)) != std::string::npos) {
        std::size_t i = pos + 8;
        if (i < masked.size() && std::isalpha(static_cast<unsigned char>(masked[i]))) {
            pos = i;  // \captionsetup, \captionof
            continue;
        }
        while (i < masked.size() && std::isspace(static_cast<unsigned char>(masked[i]))) ++i;
        if (i < masked.size() && masked[i] == '[') {  // short caption
            int depth = 0;
            for (; i < masked.size(); ++i) {
                if (masked[i] == '{') ++depth;
                else if (masked[i] == '}') --depth;
                else if (masked[i] == ']' && depth == 0) break;
            }
            ++i;
            while (i < masked.size() && std::isspace(static_cast<unsigned char>(masked[i]))) ++i;
        }
        if (i >= masked.size() || masked[i] != '{') {
            pos = i;
            continue;
        }
        auto close = text::match_brace(masked, i);
        if (close == std::string::npos) throw UnbalancedBraces("caption braces never balance");
        return text::trim(table_latex.substr(i + 1, close - i - 1));
    }
    return "";
}

std::vector<TableCandidate> extract_tables(const PaperSource& source) {
    std::vector<TableCandidate> out;
    const std::string& body = source.latex;
    std::string masked = mask_comments(body);
    std::size_t pos = 0;
    int index = 0;
    while ((pos = masked.find("\\begin", pos)) != std::string::npos) {
        auto name = env_name_at(masked, pos + 6);
        if (!name || !kTableEnvs.count(name->first)) {
            pos += 6;
            continue;
        }
        // non-greedy: the first matching \end{env}
        std::size_t search = name->second;
        std::optional<std::size_t> end;
        while ((search = masked.find("\\end", search)) != std::string::npos) {
            auto end_name = env_name_at(masked, search + 4);
            if (end_name && end_name->first == name->first) {
                end = end_name->second;
                break;
            }
            search += 4;
        }
        if (!end) {
            pos = name->second;
            continue;
        }
        TableCandidate c;
        c.paper_id = source.arxiv_id;
        c.table_index = ++index;
        c.latex = body.substr(pos, *end - pos);
        try {
            c.caption = extract_caption(c.latex);
        } catch (const UnbalancedBraces&) {
            c.caption.clear();
        }
        out.push_back(std::move(c));
        pos = *end;
    }
    return out;
}

double estimate_tokens(std::string_view s, double tokens_per_word) {
    return static_cast<double>(text::word_count(s)) * tokens_per_word;
}

ContextText build_context(const PaperSource& source, const ContextOptions& options) {
    std::string s = strip_comments(source.latex);
    s = remove_environments(std::move(s), {"thebibliography", "ack", "acks"});
    s = remove_command(std::move(s), "bibliographystyle");
    s = remove_command(std::move(s), "bibliography");
    s = remove_command(std::move(s), "includegraphics");
    s = drop_sections(s);
    s = collapse_blank_lines(s);

    ContextText ctx{source.arxiv_id, std::move(s), false};
    if (estimate_tokens(ctx.text, options.tokens_per_word) <= options.token_budget) return ctx;

    // cut back to the last paragraph boundary that fits the budget
    ctx.truncated = true;
    std::size_t keep = 0;
    std::size_t pos = 0;
    double used = 0;
    while (pos < ctx.text.size()) {
        auto brk = ctx.text.find("\n\n", pos);
        std::size_t para_end = brk == std::string::npos ? ctx.text.size() : brk;
        double cost = estimate_tokens(std::string_view(ctx.text).substr(pos, para_end - pos), options.tokens_per_word);
        if (used + cost > options.token_budget) break;
        used += cost;
        keep = para_end;
        pos = brk == std::string::npos ? ctx.text.size() : brk + 2;
    }
    if (keep == 0) {
        // the first paragraph alone is over budget: fall back to a word boundary
        std::size_t words = 0;
        auto max_words = static_cast<std::size_t>(options.token_budget / options.tokens_per_word);
        bool in_word = false;
        for (std::size_t i = 0; i < ctx.text.size(); ++i) {
            bool space = std::isspace(static_cast<unsigned char>(ctx.text[i])) != 0;
            if (!space && !in_word && ++words > max_words) break;
            in_word = !space;
            keep = i + 1;
        }
    }
    ctx.text.resize(keep);
    while (!ctx.text.empty() && std::isspace(static_cast<unsigned char>(ctx.text.back()))) ctx.text.pop_back();
    ctx.text += '\n';
    return ctx;
}

std::optional<std::string> find_arxiv_id(std::string_view entry_text) {
    static const std::regex patterns[] = {
        std::regex(R"(arxiv\.org/(?:abs|pdf)/(\d{4}\.\d{4,5})(?:v\d+)?)", std::regex::icase),
        std::regex(R"(arxiv\s*:\s*(\d{4}\.\d{4,5})(?:v\d+)?)", std::regex::icase),
        std::regex(R"(eprint\s*=\s*[{"]\s*(\d{4}\.\d{4,5})(?:v\d+)?)", std::regex::icase),
        std::regex(R"(abs/(\d{4}\.\d{4,5})(?:v\d+)?)", std::regex::icase),
        std::regex(R"(arxiv(?:\s+preprint)?\s+(\d{4}\.\d{4,5})(?:v\d+)?)", std::regex::icase),
    };
    std::string s(entry_text);
    for (const auto& re : patterns) {
        std::smatch m;
        if (std::regex_search(s, m, re)) return m[1].str();
    }
    return std::nullopt;
}

std::optional<std::string> resolve_citation(std::string_view tag, const PaperSource& source) {
    if (text::trim(tag).empty()) throw PreconditionError("citation tag must be non-empty");
    auto it = source.bibliography.find(text::trim(tag));
    if (it == source.bibliography.end()) return std::nullopt;
    return find_arxiv_id(it->second);
}

}  // namespace llmeval

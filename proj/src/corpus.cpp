#include "llmeval/corpus.hpp"

#include "llmeval/errors.hpp"
#include "llmeval/text_util.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <regex>
#include <thread>

namespace fs = std::filesystem;

namespace llmeval {

namespace {

const std::regex& arxiv_id_regex() {
    static const std::regex re(R"(^(\d{2})(\d{2})\.\d{5}$)");
    return re;
}

bool is_text_member(const std::string& name) {
    auto lower = text::to_lower(name);
    for (const char* ext : {".tex", ".bib", ".bbl", ".sty", ".cls"})
        if (lower.size() >= std::string_view(ext).size() &&
            lower.compare(lower.size() - std::string_view(ext).size(), std::string::npos, ext) == 0)
            return true;
    return false;
}

bool has_ext(const std::string& name, std::string_view ext) {
    auto lower = text::to_lower(name);
    return lower.size() >= ext.size() && lower.compare(lower.size() - ext.size(), ext.size(), ext) == 0;
}

std::string normalize_member(std::string name) {
    while (name.rfind("./", 0) == 0) name.erase(0, 2);
    return name;
}

std::string gunzip_file(const fs::path& path) {
    gzFile gz = gzopen(path.string().c_str(), "rb");
    if (!gz) throw CorruptArchive("cannot open " + path.string());
    std::string out;
    char buf[1 << 15];
    for (;;) {
        int n = gzread(gz, buf, sizeof buf);
        if (n < 0) {
            int err = 0;
            std::string msg = gzerror(gz, &err);
            gzclose(gz);
            throw CorruptArchive(path.string() + ": " + msg);
        }
        if (n == 0) break;
        out.append(buf, static_cast<std::size_t>(n));
    }
    gzclose(gz);
    return out;
}

std::uint64_t parse_octal(std::string_view field) {
    std::uint64_t v = 0;
    for (char c : field) {
        if (c == '\0' || c == ' ') {
            if (v) break;
            continue;
        }
        if (c < '0' || c > '7') throw CorruptArchive("bad octal field in tar header");
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

bool header_checksum_ok(std::string_view block) {
    std::uint64_t stored;
    try {
        stored = parse_octal(block.substr(148, 8));
    } catch (const CorruptArchive&) {
        return false;
    }
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < 512; ++i)
        sum += (i >= 148 && i < 156) ? 32u : static_cast<unsigned char>(block[i]);
    return sum == stored;
}

bool looks_like_tar(std::string_view data) {
    return data.size() >= 512 && header_checksum_ok(data.substr(0, 512));
}

std::map<std::string, std::string> untar(std::string_view data, const std::string& label) {
    std::map<std::string, std::string> files;
    std::size_t pos = 0;
    std::string long_name;
    while (pos + 512 <= data.size()) {
        std::string_view block = data.substr(pos, 512);
        if (std::all_of(block.begin(), block.end(), [](char c) { return c == '\0'; })) break;
        if (!header_checksum_ok(block)) throw CorruptArchive(label + ": tar header checksum mismatch");

        std::string name(block.substr(0, 100).data(), strnlen(block.data(), 100));
        std::string prefix(block.substr(345, 155).data(), strnlen(block.data() + 345, 155));
        if (block.substr(257, 5) == "ustar" && !prefix.empty()) name = prefix + "/" + name;
        auto size = parse_octal(block.substr(124, 12));
        char type = block[156];
        pos += 512;
        if (pos + size > data.size()) throw CorruptArchive(label + ": truncated tar member " + name);
        std::string_view body = data.substr(pos, size);
        pos += (size + 511) / 512 * 512;

        if (type == 'L') {  // GNU long name for the next member
            long_name.assign(body.data(), strnlen(body.data(), body.size()));
            continue;
        }
        if (!long_name.empty()) {
            name = long_name;
            long_name.clear();
        }
        if ((type == '0' || type == '\0') && is_text_member(name))
            files[normalize_member(name)] = std::string(body);
    }
    return files;
}

bool line_is_comment(std::string_view line) {
    auto t = text::trim(line);
    return !t.empty() && t.front() == '%';
}

/// \documentclass outside a comment line.
bool declares_documentclass(std::string_view tex) {
    for (const auto& line : text::split_lines(tex))
        if (!line_is_comment(line) && line.find("\\documentclass") != std::string::npos) return true;
    return false;
}

}  // namespace

YearMonth YearMonth::from_yymm(std::string_view yymm) {
    if (yymm.size() != 4 || !std::all_of(yymm.begin(), yymm.end(), ::isdigit))
        throw MalformedId("expected YYMM, got '" + std::string(yymm) + "'");
    int yy = std::stoi(std::string(yymm.substr(0, 2)));
    int mm = std::stoi(std::string(yymm.substr(2, 2)));
    if (mm < 1 || mm > 12) throw MalformedId("month out of range in '" + std::string(yymm) + "'");
    return {2000 + yy, mm};
}

std::string YearMonth::to_string() const {
    std::string m = std::to_string(month);
    return std::to_string(year) + "-" + (month < 10 ? "0" + m : m);
}

bool is_valid_arxiv_id(std::string_view id) {
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(id.begin(), id.end(), m, arxiv_id_regex())) return false;
    int month = std::stoi(m[2].str());
    return month >= 1 && month <= 12;
}

YearMonth arxiv_id_to_month(std::string_view arxiv_id) {
    if (!is_valid_arxiv_id(arxiv_id))
        throw MalformedId("not a YYMM.NNNNN arXiv id: '" + std::string(arxiv_id) + "'");
    return YearMonth::from_yymm(arxiv_id.substr(0, 4));
}

std::string arxiv_id_to_quarter(std::string_view arxiv_id) {
    auto ym = arxiv_id_to_month(arxiv_id);
    return std::to_string(ym.year) + "-Q" + std::to_string((ym.month - 1) / 3 + 1);
}

void CorpusFilter::validate() const {
    if (date_to < date_from) throw ConfigError("corpus window: date_from is after date_to");
    if (categories.empty()) throw ConfigError("corpus filter needs at least one category");
}

bool CorpusFilter::admits(const PaperSource& paper) const {
    if (paper.published < date_from || date_to < paper.published) return false;
    return std::any_of(paper.categories.begin(), paper.categories.end(),
                       [&](const std::string& c) { return categories.count(c) > 0; });
}

Manifest load_manifest(const fs::path& path) {
    Manifest manifest;
    for (const auto& line : text::split_lines(text::read_file(path))) {
        if (text::trim(line).empty() || line.front() == '#') continue;
        auto cols = text::split(line, '\t');
        if (cols.size() < 2) throw SchemaError("manifest line needs id and categories: " + line);
        ManifestEntry entry;
        for (auto& c : text::split(cols[1], ','))
            if (auto t = text::trim(c); !t.empty()) entry.categories.insert(t);
        if (cols.size() > 2) entry.title = text::trim(cols[2]);
        manifest[text::trim(cols[0])] = std::move(entry);
    }
    return manifest;
}

bool PaperFiles::has_latex() const {
    return std::any_of(files.begin(), files.end(),
                       [](const auto& kv) { return has_ext(kv.first, ".tex"); });
}

PaperFiles load_entry(const fs::path& entry) {
    PaperFiles out;
    std::error_code ec;
    if (fs::is_directory(entry, ec)) {
        for (auto it = fs::recursive_directory_iterator(entry); it != fs::recursive_directory_iterator(); ++it) {
            if (!it->is_regular_file()) continue;
            auto rel = fs::relative(it->path(), entry).generic_string();
            if (is_text_member(rel)) out.files[rel] = text::read_file(it->path());
        }
        return out;
    }
    auto name = entry.filename().string();
    if (has_ext(name, ".tar")) {
        out.files = untar(text::read_file(entry), name);
        return out;
    }
    std::string data = gunzip_file(entry);
    if (looks_like_tar(data)) out.files = untar(data, name);
    else if (!data.empty()) out.files["main.tex"] = std::move(data);
    return out;
}

std::string flatten_latex(const PaperFiles& entry) {
    const std::string* main = nullptr;
    std::string main_name;
    for (const auto& [name, content] : entry.files) {
        if (!has_ext(name, ".tex") || !declares_documentclass(content)) continue;
        if (!main || content.size() > main->size()) {
            main = &content;
            main_name = name;
        }
    }
    if (!main) throw NoMainFile("no .tex file contains \\documentclass");

    fs::path base = fs::path(main_name).parent_path();
    auto lookup = [&](std::string target) -> const std::string* {
        target = text::trim(target);
        for (std::string candidate : {target, target + ".tex"}) {
            for (const auto& rel : {(base / candidate).lexically_normal().generic_string(),
                                    fs::path(candidate).lexically_normal().generic_string()}) {
                auto it = entry.files.find(rel);
                if (it != entry.files.end()) return &it->second;
            }
        }
        return nullptr;
    };

    static const std::regex include_re(R"(\\(input|include)\s*\{([^}]*)\})");
    std::string out;
    out.reserve(main->size());
    auto lines = text::split_lines(*main);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const auto& line = lines[li];
        if (li) out += '\n';
        if (line_is_comment(line)) {
            out += line;
            continue;
        }
        std::size_t last = 0;
        for (std::sregex_iterator it(line.begin(), line.end(), include_re), end; it != end; ++it) {
            const auto& m = *it;
            auto at = static_cast<std::size_t>(m.position(0));
            // \input after an unescaped % on the same line is commented out
            auto pct = line.find('%');
            while (pct != std::string::npos && pct > 0 && line[pct - 1] == '\\') pct = line.find('%', pct + 1);
            if (pct != std::string::npos && pct < at) break;
            out.append(line, last, at - last);
            if (const auto* body = lookup(m[2].str())) out += *body;
            else out += m[0].str();
            last = at + static_cast<std::size_t>(m.length(0));
        }
        out.append(line, last);
    }
    if (!main->empty() && main->back() == '\n') out += '\n';
    return out;
}

std::map<std::string, std::string> extract_bibliography(std::string_view latex,
                                                        const std::vector<std::string>& sibling_bib_texts) {
    std::map<std::string, std::string> bib;

    auto scan_bibitems = [&](std::string_view src) {
        static const std::regex item_re(R"(\\bibitem\s*(\[[^\]]*\])?\s*\{([^}]*)\})");
        std::string s(src);
        std::vector<std::pair<std::size_t, std::pair<std::size_t, std::string>>> items;
        for (std::sregex_iterator it(s.begin(), s.end(), item_re), end; it != end; ++it)
            items.push_back({static_cast<std::size_t>(it->position(0)),
                             {static_cast<std::size_t>(it->position(0) + it->length(0)), (*it)[2].str()}});
        for (std::size_t i = 0; i < items.size(); ++i) {
            std::size_t body_start = items[i].second.first;
            std::size_t body_end = i + 1 < items.size() ? items[i + 1].first : s.size();
            auto close = s.find("\\end{thebibliography}", body_start);
            if (close != std::string::npos && close < body_end) body_end = close;
            auto key = text::trim(items[i].second.second);
            if (!key.empty()) bib[key] = text::trim(std::string_view(s).substr(body_start, body_end - body_start));
        }
    };

    auto scan_bibtex = [&](std::string_view src) {
        std::size_t pos = 0;
        while ((pos = src.find('@', pos)) != std::string_view::npos) {
            auto open = src.find_first_of("{(", pos);
            if (open == std::string_view::npos) break;
            auto type = text::to_lower(text::trim(src.substr(pos + 1, open - pos - 1)));
            if (type.empty() || !std::all_of(type.begin(), type.end(), ::isalpha)) {
                ++pos;
                continue;
            }
            std::size_t close;
            if (src[open] == '{') {
                close = text::match_brace(src, open);
            } else {
                close = src.find(')', open);
            }
            if (close == std::string_view::npos) break;
            if (type != "string" && type != "comment" && type != "preamble") {
                auto body = src.substr(open + 1, close - open - 1);
                auto comma = body.find(',');
                auto key = text::trim(body.substr(0, comma));
                if (!key.empty() && comma != std::string_view::npos)
                    bib[key] = std::string(src.substr(pos, close - pos + 1));
            }
            pos = close + 1;
        }
    };

    scan_bibitems(latex);
    for (const auto& t : sibling_bib_texts) {
        if (t.find("\\bibitem") != std::string::npos) scan_bibitems(t);
        else scan_bibtex(t);
    }
    return bib;
}

std::string extract_title(std::string_view latex) {
    for (std::size_t pos = latex.find("\\title"); pos != std::string_view::npos;
         pos = latex.find("\\title", pos + 1)) {
        std::size_t i = pos + 6;
        if (i < latex.size() && std::isalpha(static_cast<unsigned char>(latex[i]))) continue;  // \titlerunning
        while (i < latex.size() && std::isspace(static_cast<unsigned char>(latex[i]))) ++i;
        if (i < latex.size() && latex[i] == '[') {
            auto close = latex.find(']', i);
            if (close == std::string_view::npos) return "";
            i = close + 1;
            while (i < latex.size() && std::isspace(static_cast<unsigned char>(latex[i]))) ++i;
        }
        if (i >= latex.size() || latex[i] != '{') continue;
        auto close = text::match_brace(latex, i);
        if (close == std::string_view::npos) return "";
        std::string t(latex.substr(i + 1, close - i - 1));
        text::replace_all(t, "\\\\", " ");
        std::replace(t.begin(), t.end(), '\n', ' ');
        std::string folded;
        for (char c : t)
            if (!(c == ' ' && !folded.empty() && folded.back() == ' ')) folded += c;
        return text::trim(folded);
    }
    return "";
}

namespace {

struct EntryOutcome {
    std::optional<PaperSource> source;
    std::optional<SkipEntry> skip;
};

EntryOutcome process_entry(const fs::path& path, const std::string& id, const CorpusFilter& filter,
                           const Manifest& manifest) {
    EntryOutcome out;
    auto skip = [&](std::string reason) {
        out.skip = SkipEntry{path.filename().string(), std::move(reason)};
        return out;
    };
    if (!is_valid_arxiv_id(id)) return skip("malformed-id");
    auto published = arxiv_id_to_month(id);
    if (published < filter.date_from || filter.date_to < published) return skip("date-out-of-window");
    auto meta = manifest.find(id);
    if (meta == manifest.end()) return skip("no-metadata");
    if (std::none_of(meta->second.categories.begin(), meta->second.categories.end(),
                     [&](const std::string& c) { return filter.categories.count(c) > 0; }))
        return skip("category-mismatch");

    PaperFiles files;
    try {
        files = load_entry(path);
    } catch (const CorruptArchive& e) {
        return skip(std::string("corrupt-archive: ") + e.what());
    } catch (const IoError& e) {
        return skip(std::string("io-error: ") + e.what());
    }
    if (!files.has_latex()) return skip("no-latex");

    PaperSource paper;
    try {
        paper.latex = flatten_latex(files);
    } catch (const NoMainFile&) {
        return skip("no-main-file");
    }
    if (text::trim(paper.latex).empty()) return skip("no-latex");
    paper.arxiv_id = id;
    paper.categories = meta->second.categories;
    paper.published = published;
    std::vector<std::string> bib_texts;
    for (const auto& [name, content] : files.files)
        if (has_ext(name, ".bib") || has_ext(name, ".bbl")) bib_texts.push_back(content);
    paper.bibliography = extract_bibliography(paper.latex, bib_texts);
    paper.title = extract_title(paper.latex);
    if (paper.title.empty()) paper.title = meta->second.title;
    out.source = std::move(paper);
    return out;
}

std::optional<std::string> entry_id(const fs::directory_entry& de) {
    auto name = de.path().filename().string();
    if (de.is_directory()) return name;
    for (std::string_view ext : {".tar.gz", ".tgz", ".tar", ".gz"})
        if (has_ext(name, ext)) return name.substr(0, name.size() - ext.size());
    return std::nullopt;
}

}  // namespace

ScanResult scan_corpus(const fs::path& root, const CorpusFilter& filter,
                       const std::optional<Manifest>& manifest, unsigned workers) {
    filter.validate();
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw IoError("corpus root is not a readable directory: " + root.string());
    Manifest loaded = manifest ? *manifest
                               : (fs::exists(root / "manifest.tsv") ? load_manifest(root / "manifest.tsv")
                                                                    : Manifest{});

    std::vector<std::pair<std::string, fs::path>> entries;
    for (const auto& de : fs::directory_iterator(root))
        if (auto id = entry_id(de)) entries.emplace_back(*id, de.path());
    std::sort(entries.begin(), entries.end());

    std::vector<EntryOutcome> outcomes(entries.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < entries.size();)
            outcomes[i] = process_entry(entries[i].second, entries[i].first, filter, loaded);
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < std::max(1u, workers); ++w) pool.emplace_back(work);
        work();
    }

    ScanResult result;
    for (auto& o : outcomes) {
        if (o.source) result.sources.push_back(std::move(*o.source));
        else result.skips.push_back(std::move(*o.skip));
    }
    return result;
}

}  // namespace llmeval

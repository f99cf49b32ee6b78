#include "llmeval/table_filter.hpp"

#include "llmeval/text_util.hpp"

namespace llmeval {

namespace {

std::string_view leaderboard_name(Leaderboard l) {
    switch (l) {
        case Leaderboard::Yes: return "true";
        case Leaderboard::No: return "false";
        case Leaderboard::Undetermined: return "undetermined";
    }
    return "undetermined";
}

}  // namespace

json FilterVerdict::to_json() const {
    return {{"paper_id", paper_id},
            {"table_index", table_index},
            {"keyword_pass", keyword_pass},
            {"leaderboard", leaderboard_name(leaderboard)},
            {"reason", reason}};
}

FilterVerdict FilterVerdict::from_json(const json& j) {
    FilterVerdict v;
    v.paper_id = j.at("paper_id").get<std::string>();
    v.table_index = j.at("table_index").get<int>();
    v.keyword_pass = j.at("keyword_pass").get<bool>();
    auto l = j.at("leaderboard").get<std::string>();
    v.leaderboard = l == "true" ? Leaderboard::Yes : l == "false" ? Leaderboard::No : Leaderboard::Undetermined;
    v.reason = j.value("reason", "");
    return v;
}

bool keyword_prefilter(const TableCandidate& candidate, const std::set<std::string>& keywords) {
    if (keywords.empty()) throw PreconditionError("keyword set must be non-empty");
    auto lowered = text::to_lower(candidate.latex);
    for (const auto& k : keywords)
        if (lowered.find(text::to_lower(k)) != std::string::npos) return true;
    return false;
}

std::optional<bool> parse_leaderboard_reply(std::string_view reply) {
    auto t = text::to_lower(text::trim(reply));
    while (!t.empty() && (t.back() == '.' || t.back() == '\'' || t.back() == '"')) t.pop_back();
    while (!t.empty() && (t.front() == '\'' || t.front() == '"')) t.erase(0, 1);
    if (t == "true") return true;
    if (t == "false") return false;
    return std::nullopt;
}

std::string render_leaderboard_prompt(const PromptTemplate& tmpl, const TableCandidate& candidate) {
    return tmpl.render({{"table_latex", candidate.latex}});
}

Leaderboard classify_leaderboard(const TableCandidate& candidate, Gateway& gateway,
                                 const PromptTemplate& tmpl) {
    auto reply = parse_leaderboard_reply(gateway.complete(render_leaderboard_prompt(tmpl, candidate)));
    if (!reply) return Leaderboard::Undetermined;
    return *reply ? Leaderboard::Yes : Leaderboard::No;
}

std::vector<FilterVerdict> filter_tables(const std::vector<TableCandidate>& candidates,
                                         const std::set<std::string>& keywords, Gateway& gateway,
                                         const PromptTemplate& tmpl) {
    std::vector<FilterVerdict> verdicts;
    std::vector<std::size_t> to_classify;
    std::vector<std::string> prompts;
    for (const auto& c : candidates) {
        FilterVerdict v{c.paper_id, c.table_index, keyword_prefilter(c, keywords), Leaderboard::Undetermined, ""};
        if (!v.keyword_pass) {
            v.reason = "no-keyword";
        } else {
            to_classify.push_back(verdicts.size());
            prompts.push_back(render_leaderboard_prompt(tmpl, c));
        }
        verdicts.push_back(std::move(v));
    }
    if (prompts.empty()) return verdicts;

    auto batch = gateway.complete_batch(prompts);
    for (const auto& err : batch.errors) {
        auto& v = verdicts[to_classify[err.index]];
        v.reason = "gateway-error: " + err.kind;
    }
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        auto& v = verdicts[to_classify[i]];
        if (!batch.responses[i]) continue;
        auto parsed = parse_leaderboard_reply(*batch.responses[i]);
        if (!parsed) {
            v.leaderboard = Leaderboard::Undetermined;
            v.reason = "unparseable-verdict";
        } else {
            v.leaderboard = *parsed ? Leaderboard::Yes : Leaderboard::No;
            v.reason = *parsed ? "leaderboard" : "not-leaderboard";
        }
    }
    return verdicts;
}

}  // namespace llmeval
